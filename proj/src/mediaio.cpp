// Copyright (c) 2026, The signpipe authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "signpipe/mediaio.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "signpipe/child_process.hpp"
#include "signpipe/error.hpp"

namespace signpipe::mediaio {

namespace fs = std::filesystem;

void validate(const MediaInfo& info) {
    auto positive = [](double v) { return std::isfinite(v) && v > 0; };
    if (!positive(info.duration_s)) fail(Errc::BadMetadata, "duration_s must be positive");
    if (!positive(info.fps)) fail(Errc::BadMetadata, "fps must be positive");
    if (info.width <= 0 || info.height <= 0) fail(Errc::BadMetadata, "frame size must be positive");
}

namespace {

double number(const Json& tree, const char* key) {
    if (!tree.contains(key) || !tree.at(key).is_number()) {
        fail(Errc::BadMetadata, std::string("missing or non-numeric '") + key + "'");
    }
    return tree.at(key).get<double>();
}

int integer(const Json& tree, const char* key) {
    if (!tree.contains(key) || !tree.at(key).is_number_integer()) {
        fail(Errc::BadMetadata, std::string("missing or non-integer '") + key + "'");
    }
    return tree.at(key).get<int>();
}

geometry::Box box_from_json(const Json& v) {
    if (!v.is_array() || v.size() != 4) fail(Errc::BadMetadata, "box must be [x0, y0, x1, y1]");
    geometry::Box b;
    double* fields[] = {&b.x0, &b.y0, &b.x1, &b.y1};
    for (std::size_t i = 0; i < 4; ++i) {
        if (!v[i].is_number()) fail(Errc::BadMetadata, "box coordinates must be numbers");
        *fields[i] = v[i].get<double>();
    }
    return b;
}

Json box_to_json(const geometry::Box& b) { return Json::array({b.x0, b.y0, b.x1, b.y1}); }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Unreadable, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// format_real refuses non-finite values; error messages must not.
std::string show(double v) { return std::isfinite(v) ? format_real(v) : std::to_string(v); }

void check_range(double start_s, double end_s) {
    if (!std::isfinite(start_s) || !std::isfinite(end_s) || !(start_s < end_s)) {
        fail(Errc::InvalidRange, "need start_s < end_s, got " + show(start_s) + " .. " + show(end_s));
    }
}

void check_times(const MediaInfo& info, const std::vector<double>& times) {
    for (double t : times) {
        if (!std::isfinite(t) || t < 0 || t > info.duration_s) {
            fail(Errc::DecodeFailure, "time " + show(t) + " outside media duration " +
                                          format_real(info.duration_s));
        }
    }
}

}  // namespace

SyntheticMedia synthetic_media_from_json(const Json& tree) {
    if (!tree.is_object()) fail(Errc::BadMetadata, "synthetic media descriptor must be an object");
    SyntheticMedia m;
    m.info = {number(tree, "duration_s"), number(tree, "fps"), integer(tree, "width"), integer(tree, "height")};
    validate(m.info);
    if (tree.contains("scene")) {
        if (!tree.at("scene").is_array()) fail(Errc::BadMetadata, "scene must be a list");
        for (const auto& s : tree.at("scene")) {
            SceneSpan span;
            span.start_s = number(s, "start_s");
            span.end_s = number(s, "end_s");
            if (s.contains("boxes")) {
                for (const auto& b : s.at("boxes")) {
                    auto box = box_from_json(b);
                    const geometry::Box frame{0, 0, double(m.info.width), double(m.info.height)};
                    if (!box.valid() || !frame.contains(box)) fail(Errc::BadMetadata, "scene box outside frame");
                    span.boxes.push_back(box);
                }
            }
            if (s.contains("scores")) {
                for (const auto& v : s.at("scores")) {
                    if (!v.is_number()) fail(Errc::BadMetadata, "scores must be numbers");
                    span.scores.push_back(v.get<double>());
                }
                if (span.scores.size() != span.boxes.size()) fail(Errc::BadMetadata, "scores and boxes differ in length");
            } else {
                span.scores.assign(span.boxes.size(), 1.0);
            }
            m.scene.push_back(std::move(span));
        }
    }
    return m;
}

Json to_json(const SyntheticMedia& media) {
    Json scene = Json::array();
    for (const auto& s : media.scene) {
        Json boxes = Json::array();
        for (const auto& b : s.boxes) boxes.push_back(box_to_json(b));
        scene.push_back({{"start_s", s.start_s}, {"end_s", s.end_s}, {"boxes", boxes}, {"scores", s.scores}});
    }
    return {{"duration_s", media.info.duration_s},
            {"fps", media.info.fps},
            {"width", media.info.width},
            {"height", media.info.height},
            {"scene", scene}};
}

std::vector<double> sample_times(double start_s, double end_s, double rate_hz) {
    check_range(start_s, end_s);
    if (!std::isfinite(rate_hz) || rate_hz <= 0) fail(Errc::InvalidRange, "rate_hz must be positive");
    const auto n = static_cast<std::int64_t>(std::floor((end_s - start_s) * rate_hz));
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(n + 1));
    for (std::int64_t i = 0; i <= n; ++i) {
        const double t = start_s + static_cast<double>(i) / rate_hz;
        if (i > 0 && t >= end_s) continue;
        times.push_back(t);
    }
    return times;
}

std::int64_t nearest_frame(const MediaInfo& info, double t) {
    const auto total = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(info.duration_s * info.fps)));
    const auto idx = static_cast<std::int64_t>(std::llround(t * info.fps));
    return std::clamp<std::int64_t>(idx, 0, total - 1);
}

Json to_json(const RenderDescriptor& d) {
    return {{"input", d.input},
            {"start_s", d.start_s},
            {"end_s", d.end_s},
            {"crop", box_to_json(d.plan.crop)},
            {"output_width", d.plan.output_width},
            {"output_height", d.plan.output_height}};
}

RenderDescriptor render_descriptor_from_json(const Json& tree) {
    if (!tree.is_object() || !tree.contains("input") || !tree.at("input").is_string()) {
        fail(Errc::BadMetadata, "render descriptor needs an input");
    }
    RenderDescriptor d;
    d.input = tree.at("input").get<std::string>();
    d.start_s = number(tree, "start_s");
    d.end_s = number(tree, "end_s");
    if (!tree.contains("crop")) fail(Errc::BadMetadata, "render descriptor needs a crop");
    d.plan.crop = box_from_json(tree.at("crop"));
    d.plan.output_width = integer(tree, "output_width");
    d.plan.output_height = integer(tree, "output_height");
    return d;
}

bool is_synthetic_path(const fs::path& path) {
    const std::string s = path.filename().string();
    return s.size() >= kSyntheticExt.size() && s.compare(s.size() - kSyntheticExt.size(), kSyntheticExt.size(),
                                                          kSyntheticExt) == 0;
}

std::map<std::string, std::string> render_tokens(const fs::path& input, double start_s, double end_s,
                                                 const geometry::CropPlan& plan, const fs::path& output) {
    auto whole = [](double v) { return std::to_string(static_cast<long long>(std::llround(v))); };
    return {{"input", input.string()},
            {"start", format_real(start_s)},
            {"end", format_real(end_s)},
            {"x", whole(plan.crop.x0)},
            {"y", whole(plan.crop.y0)},
            {"w", whole(plan.crop.width())},
            {"h", whole(plan.crop.height())},
            {"out_w", std::to_string(plan.output_width)},
            {"out_h", std::to_string(plan.output_height)},
            {"output", output.string()}};
}

namespace {

class SyntheticMediaBackend final : public MediaBackend {
public:
    MediaInfo probe(const fs::path& path) const override { return load(path).info; }

    std::vector<DecodedFrame> decode_frames(const fs::path& path, const std::vector<double>& times) const override {
        if (times.empty()) return {};
        const SyntheticMedia m = load(path);
        check_times(m.info, times);
        std::vector<DecodedFrame> out;
        out.reserve(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            DecodedFrame f;
            f.time_s = times[i];
            f.frame_index = nearest_frame(m.info, times[i]);
            f.width = m.info.width;
            f.height = m.info.height;
            f.path = path.string();
            const double frame_time = static_cast<double>(f.frame_index) / m.info.fps;
            for (const auto& span : m.scene) {
                if (frame_time < span.start_s || frame_time >= span.end_s) continue;
                for (std::size_t b = 0; b < span.boxes.size(); ++b) {
                    f.detections.push_back({static_cast<int>(i), span.boxes[b], span.scores[b]});
                }
            }
            out.push_back(std::move(f));
        }
        return out;
    }

    void render_clip(const fs::path& path, double start_s, double end_s, const geometry::CropPlan& plan,
                     const fs::path& out_path) const override {
        check_range(start_s, end_s);
        RenderDescriptor d{path.filename().string(), start_s, end_s, plan};
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        out << canonical_dump(to_json(d));
        if (!out) fail(Errc::WriteFailure, "cannot write " + out_path.string());
    }

    std::string output_ext() const override { return std::string(kClipDescriptorExt); }

private:
    static SyntheticMedia load(const fs::path& path) {
        if (!fs::is_regular_file(path)) fail(Errc::Unreadable, "no such media file: " + path.string());
        Json tree;
        try {
            tree = Json::parse(read_file(path));
        } catch (const Json::exception& e) {
            fail(Errc::Unreadable, path.string() + ": " + e.what());
        }
        return synthetic_media_from_json(tree);
    }
};

double parse_rate(const Json& v) {
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) fail(Errc::BadMetadata, "frame rate must be a number or a fraction");
    const std::string s = v.get<std::string>();
    try {
        const auto slash = s.find('/');
        if (slash == std::string::npos) return std::stod(s);
        const double den = std::stod(s.substr(slash + 1));
        if (den == 0) fail(Errc::BadMetadata, "frame rate " + s);
        return std::stod(s.substr(0, slash)) / den;
    } catch (const std::logic_error&) {
        fail(Errc::BadMetadata, "unparseable frame rate " + s);
    }
}

double parse_number_field(const Json& v, const char* what) {
    try {
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) return std::stod(v.get<std::string>());
    } catch (const std::logic_error&) {
    }
    fail(Errc::BadMetadata, std::string("unparseable ") + what);
}

class ExternalMediaBackend final : public MediaBackend {
public:
    explicit ExternalMediaBackend(config::MediaConfig config) : config_(std::move(config)) {}

    MediaInfo probe(const fs::path& path) const override {
        if (!fs::exists(path)) fail(Errc::Unreadable, "no such media file: " + path.string());
        const auto argv = process::substitute(process::split_command(config_.probe_command), {{"input", path.string()}});
        process::CommandResult r;
        try {
            r = process::run_command(argv);
        } catch (const Error& e) {
            fail(Errc::Unreadable, std::string("probe: ") + e.what());
        }
        if (r.exit_code != 0) fail(Errc::Unreadable, "probe exited " + std::to_string(r.exit_code) + ": " + r.output);
        Json tree;
        try {
            tree = Json::parse(r.output);
        } catch (const Json::exception&) {
            fail(Errc::BadMetadata, "probe output is not JSON");
        }
        const Json* stream = nullptr;
        if (tree.contains("streams") && tree["streams"].is_array() && !tree["streams"].empty()) {
            stream = &tree["streams"][0];
        }
        if (!stream || !tree.contains("format")) fail(Errc::BadMetadata, "probe output lacks streams/format");
        MediaInfo info;
        info.duration_s = tree["format"].contains("duration")
                              ? parse_number_field(tree["format"]["duration"], "duration")
                              : 0.0;
        info.fps = stream->contains("r_frame_rate") ? parse_rate(stream->at("r_frame_rate")) : 0.0;
        info.width = stream->value("width", 0);
        info.height = stream->value("height", 0);
        validate(info);
        return info;
    }

    std::vector<DecodedFrame> decode_frames(const fs::path& path, const std::vector<double>& times) const override {
        if (times.empty()) return {};
        MediaInfo info;
        try {
            info = probe(path);
        } catch (const Error& e) {
            fail(Errc::DecodeFailure, e.what());
        }
        check_times(info, times);
        std::vector<DecodedFrame> out;
        for (double t : times) {
            out.push_back({t, nearest_frame(info, t), info.width, info.height, path.string(), {}});
        }
        return out;
    }

    void render_clip(const fs::path& path, double start_s, double end_s, const geometry::CropPlan& plan,
                     const fs::path& out_path) const override {
        check_range(start_s, end_s);
        const auto argv = process::substitute(process::split_command(config_.render_command),
                                              render_tokens(path, start_s, end_s, plan, out_path));
        process::CommandResult r;
        try {
            r = process::run_command(argv);
        } catch (const Error& e) {
            fail(Errc::CommandFailure, e.what());
        }
        if (r.exit_code != 0) {
            fail(Errc::CommandFailure, "render exited " + std::to_string(r.exit_code) + ": " + r.output);
        }
    }

    std::string output_ext() const override { return config_.output_ext; }

private:
    config::MediaConfig config_;
};

}  // namespace

std::unique_ptr<MediaBackend> make_synthetic_media() { return std::make_unique<SyntheticMediaBackend>(); }

std::unique_ptr<MediaBackend> make_external_media(const config::MediaConfig& config) {
    return std::make_unique<ExternalMediaBackend>(config);
}

}  // namespace signpipe::mediaio
