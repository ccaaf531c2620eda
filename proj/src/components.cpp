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

#include "signpipe/components.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "signpipe/error.hpp"
#include "signpipe/geometry.hpp"
#include "signpipe/npy.hpp"
#include "signpipe/posepost.hpp"

namespace signpipe::pipeline {

namespace fs = std::filesystem;
using config::JobConfig;

namespace {

Json optional_string(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

std::optional<std::string> read_optional_string(const Json& tree, const char* key) {
    if (!tree.contains(key) || tree.at(key).is_null()) return std::nullopt;
    return tree.at(key).get<std::string>();
}

std::string ordinal_name(std::size_t ordinal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%08zu", ordinal);
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Unreadable, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Errc::WriteFailure, "cannot write " + path.string());
}

/// Errors that drop one sample rather than the whole stage.
bool sample_level(Errc code) {
    switch (code) {
        case Errc::BackendCrash:
        case Errc::ProtocolError:
        case Errc::DecodeFailure:
        case Errc::CommandFailure:
        case Errc::Unreadable:
        case Errc::BadMetadata:
        case Errc::InvalidRange:
        case Errc::DegenerateBox:
        case Errc::NoValidPoints:
            return true;
        default:
            return false;
    }
}

Outcome reject(std::string reason) { return {std::nullopt, std::move(reason)}; }

// ---- media / detection ---------------------------------------------------------

class MediaSet {
public:
    MediaSet(const JobConfig& cfg, const Registries& reg) : cfg_(cfg), reg_(reg) {}

    const mediaio::MediaBackend& for_path(const fs::path& path) {
        std::string name = cfg_.processing.media.backend_name;
        if (name == "auto") name = mediaio::is_synthetic_path(path) ? "synthetic" : "external";
        auto it = cache_.find(name);
        if (it == cache_.end()) it = cache_.emplace(name, reg_.media.resolve(name)(cfg_.processing.media)).first;
        return *it->second;
    }

    static std::string name_for(const JobConfig& cfg, const fs::path& path) {
        const std::string& name = cfg.processing.media.backend_name;
        if (name != "auto") return name;
        return mediaio::is_synthetic_path(path) ? "synthetic" : "external";
    }

private:
    const JobConfig& cfg_;
    const Registries& reg_;
    std::map<std::string, std::unique_ptr<mediaio::MediaBackend>> cache_;
};

class ScriptedDetector final : public Detector {
public:
    std::vector<geometry::Detection> detect(const mediaio::DecodedFrame& frame, int position) const override {
        auto out = frame.detections;
        for (auto& d : out) d.frame_index = position;
        return out;
    }
};

class FullFrameDetector final : public Detector {
public:
    std::vector<geometry::Detection> detect(const mediaio::DecodedFrame& frame, int position) const override {
        return {{position, {0, 0, double(frame.width), double(frame.height)}, 1.0}};
    }
};

struct Region {
    std::optional<geometry::Box> box;
    std::string skip;  // non-empty when the clip is skipped
};

/// Pass one: sample the detection grid, pick the signer region.
Region detect_region(const JobConfig& cfg, const Detector& detector, const mediaio::MediaBackend& media,
                     const fs::path& video, double start, double end) {
    const auto& dc = *cfg.processing.detector;
    const auto grid = mediaio::sample_times(start, end, dc.rate_hz);
    std::vector<double> times;
    for (std::size_t i = 0; i < grid.size(); i += static_cast<std::size_t>(dc.sample_stride)) times.push_back(grid[i]);
    const auto frames = media.decode_frames(video, times);
    std::map<int, std::vector<geometry::Detection>> census;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        census[static_cast<int>(i)] = detector.detect(frames[i], static_cast<int>(i));
    }
    auto result = geometry::select_signer_region(census, dc.min_score);
    if (auto* skip = std::get_if<geometry::Skip>(&result)) return {std::nullopt, std::string(to_string(skip->reason))};
    return {std::get<geometry::Box>(result), {}};
}

Item base_item(const manifest::ManifestRecord& r, std::size_t ordinal, double start, double end) {
    Item item;
    item.ordinal = ordinal;
    item.sample_id = r.sample_id;
    item.video_id = r.video_id;
    item.start_s = start;
    item.end_s = end;
    item.text = r.text;
    item.split = r.split;
    return item;
}

Json channel_names(const posepost::LandmarkClip& clip) {
    Json out = Json::array();
    for (auto c : clip.channels) out.push_back(std::string(posepost::to_string(c)));
    return out;
}

// ---- pose processor -----------------------------------------------------------------

class PoseWorker final : public ProcessWorker {
public:
    PoseWorker(const JobConfig& cfg, const Registries& reg)
        : cfg_(cfg), media_(cfg, reg), session_(reg.extractors.resolve(cfg.processing.extractor->backend_name), spec(cfg)) {
        if (cfg.processing.detector) detector_ = reg.detectors.resolve(cfg.processing.detector->backend_name)(*cfg.processing.detector);
    }

    Outcome process(const manifest::ManifestRecord& r, std::size_t ordinal, const fs::path& out_dir) override {
        session_.ready();  // start-up failures abort the stage
        const fs::path video = video_dir(cfg_) / (r.video_id + cfg_.dataset.video_ext);
        try {
            const auto& media = media_.for_path(video);
            const auto info = media.probe(video);
            const double start = r.start_s.value_or(0.0);
            const double end = r.end_s.value_or(info.duration_s);

            std::optional<geometry::Box> hint;
            if (detector_) {
                auto region = detect_region(cfg_, *detector_, media, video, start, end);
                if (!region.skip.empty()) return reject(region.skip);
                hint = region.box;
            } else if (r.bbox) {
                hint = geometry::clamp_box(*r.bbox, info.width, info.height);
            }
            if (hint && cfg_.processing.crop) {
                hint = geometry::pad_box(*hint, cfg_.processing.crop->pad_fraction, info.width, info.height);
            }

            const auto times = mediaio::sample_times(start, end, cfg_.processing.frame_rate_hz);
            const auto frames = media.decode_frames(video, times);
            std::vector<extractor::FrameRequest> requests;
            requests.reserve(frames.size());
            for (std::size_t i = 0; i < frames.size(); ++i) {
                extractor::FrameRequest f;
                f.index = static_cast<std::int64_t>(i);
                f.width = frames[i].width;
                f.height = frames[i].height;
                f.bbox = hint;
                f.sample_id = r.sample_id;
                f.transport = extractor::Transport::FileRef;
                f.path = frames[i].path;
                f.frame_index = frames[i].frame_index;
                requests.push_back(std::move(f));
            }
            auto clip = session_.extract(requests, hint);
            clip.fps = cfg_.processing.frame_rate_hz;
            clip.sample_id = r.sample_id;

            Item item = base_item(r, ordinal, start, end);
            item.processor = "pose/" + cfg_.processing.extractor->backend_name;
            item.payload = ordinal_name(ordinal) + ".npy";
            item.payload_ext = "pose.npy";
            item.pose = {{"channels", channel_names(clip)},
                         {"space", std::string(posepost::to_string(clip.space))},
                         {"fps", clip.fps},
                         {"backend", clip.backend_name},
                         {"flattened", false},
                         {"zeroed_frames", Json::array()}};
            write_file(out_dir / item.payload,
                       npy::encode_array(clip.data, {clip.frames, clip.keypoints, clip.channel_count()},
                                         npy::ElementKind::F8));
            return {std::move(item), {}};
        } catch (const Error& e) {
            if (sample_level(e.code())) return reject(std::string(to_string(e.code())));
            throw;
        }
    }

private:
    static extractor::ExtractorSpec spec(const JobConfig& cfg) {
        const auto& ec = *cfg.processing.extractor;
        extractor::ExtractorSpec s{ec.backend_name, ec.command, ec.params, ec.expected_keypoints, ec.channels};
        // the synthetic backend derives values from the run seed unless the job pins one
        if (!s.params.contains("seed")) s.params["seed"] = cfg.runtime.seed;
        return s;
    }

    const JobConfig& cfg_;
    MediaSet media_;
    extractor::ExtractorSession session_;
    std::unique_ptr<Detector> detector_;
};

class PoseProcessor final : public Processor {
public:
    PoseProcessor(const JobConfig& cfg, const Registries& reg) : cfg_(cfg), reg_(reg) {}
    std::unique_ptr<ProcessWorker> make_worker(int) const override { return std::make_unique<PoseWorker>(cfg_, reg_); }

private:
    const JobConfig& cfg_;
    const Registries& reg_;
};

// ---- video processor ----------------------------------------------------------------

class VideoWorker final : public ProcessWorker {
public:
    VideoWorker(const JobConfig& cfg, const Registries& reg) : cfg_(cfg), media_(cfg, reg) {
        if (cfg.processing.detector) detector_ = reg.detectors.resolve(cfg.processing.detector->backend_name)(*cfg.processing.detector);
    }

    Outcome process(const manifest::ManifestRecord& r, std::size_t ordinal, const fs::path& out_dir) override {
        const fs::path video = video_dir(cfg_) / (r.video_id + cfg_.dataset.video_ext);
        const auto& crop = *cfg_.processing.crop;
        try {
            const auto& media = media_.for_path(video);
            const auto info = media.probe(video);
            const double start = r.start_s.value_or(0.0);
            const double end = r.end_s.value_or(info.duration_s);

            geometry::Box region{0, 0, double(info.width), double(info.height)};
            if (detector_) {
                auto found = detect_region(cfg_, *detector_, media, video, start, end);
                if (!found.skip.empty()) return reject(found.skip);
                region = *found.box;
            } else if (r.bbox) {
                region = geometry::clamp_box(*r.bbox, info.width, info.height);
            }
            geometry::Box box = geometry::pad_box(region, crop.pad_fraction, info.width, info.height);
            if (crop.target_aspect) {
                try {
                    box = geometry::expand_to_aspect(box, *crop.target_aspect, info.width, info.height);
                } catch (const Error& e) {
                    if (e.code() != Errc::Unsatisfiable) throw;
                    // keep the padded box; the resize step still fixes the output size
                }
            }
            std::optional<geometry::Size> resize;
            if (crop.resize) resize = geometry::Size{crop.resize->width, crop.resize->height};
            const auto plan = geometry::make_crop_plan(box, resize, info.width, info.height);

            Item item = base_item(r, ordinal, start, end);
            item.processor = "video/" + MediaSet::name_for(cfg_, video);
            item.payload_ext = media.output_ext();
            item.payload = ordinal_name(ordinal) + "." + item.payload_ext;
            media.render_clip(video, start, end, plan, out_dir / item.payload);
            return {std::move(item), {}};
        } catch (const Error& e) {
            if (sample_level(e.code())) return reject(std::string(to_string(e.code())));
            throw;
        }
    }

private:
    const JobConfig& cfg_;
    MediaSet media_;
    std::unique_ptr<Detector> detector_;
};

class VideoProcessor final : public Processor {
public:
    VideoProcessor(const JobConfig& cfg, const Registries& reg) : cfg_(cfg), reg_(reg) {}
    std::unique_ptr<ProcessWorker> make_worker(int) const override { return std::make_unique<VideoWorker>(cfg_, reg_); }

private:
    const JobConfig& cfg_;
    const Registries& reg_;
};

// ---- postprocessors -------------------------------------------------------------------

class PassthroughPostprocessor final : public Postprocessor {
public:
    Outcome apply(const Item& item, const fs::path& in_dir, const fs::path& out_dir) const override {
        std::error_code ec;
        fs::copy_file(in_dir / item.payload, out_dir / item.payload, fs::copy_options::overwrite_existing, ec);
        if (ec) fail(Errc::WriteFailure, "cannot copy " + item.payload + ": " + ec.message());
        return {item, {}};
    }
};

class LandmarkPostprocessor final : public Postprocessor {
public:
    explicit LandmarkPostprocessor(const JobConfig& cfg) : cfg_(cfg.postprocess) {
        if (cfg_.preset_name) preset_ = posepost::resolve_preset(*cfg_.preset_name);
    }

    Outcome apply(const Item& item, const fs::path& in_dir, const fs::path& out_dir) const override {
        auto clip = load_clip(item, in_dir);
        if (preset_) clip = posepost::reduce_keypoints(clip, *preset_);
        if (cfg_.mask_invisible) clip = posepost::mask_invisible(clip, cfg_.normalize.visibility_threshold);

        posepost::NormalizeOptions opts{cfg_.normalize.scope, cfg_.normalize.visibility_threshold,
                                        cfg_.normalize.epsilon};
        std::vector<std::size_t> zeroed;
        try {
            clip = posepost::unit_bbox_normalize(clip, opts, &zeroed);
        } catch (const Error& e) {
            if (e.code() == Errc::NoValidPoints) return reject("NoValidPoints");
            throw;
        }
        if (!cfg_.keep_depth) clip = posepost::drop_depth(clip);

        Item out = item;
        out.pose["channels"] = channel_names(clip);
        out.pose["space"] = std::string(posepost::to_string(clip.space));
        out.pose["zeroed_frames"] = zeroed;
        std::string bytes;
        if (cfg_.flatten) {
            const auto flat = posepost::flatten(clip);
            bytes = npy::encode_array(flat.data, {flat.rows, flat.cols}, npy::ElementKind::F8);
            out.pose["flattened"] = true;
            out.pose["keypoints"] = clip.keypoints;
        } else {
            bytes = npy::encode_array(clip.data, {clip.frames, clip.keypoints, clip.channel_count()},
                                      npy::ElementKind::F8);
        }
        write_file(out_dir / out.payload, bytes);
        return {std::move(out), {}};
    }

private:
    static posepost::LandmarkClip load_clip(const Item& item, const fs::path& dir) {
        const auto arr = npy::decode_array(read_file(dir / item.payload));
        if (arr.shape.size() != 3) fail(Errc::InvalidValue, item.payload + ": expected a (T, K, C) array");
        std::vector<posepost::Channel> channels;
        for (const auto& c : item.pose.at("channels")) {
            auto ch = posepost::channel_from_string(c.get<std::string>());
            if (!ch) fail(Errc::InvalidValue, item.payload + ": unknown channel");
            channels.push_back(*ch);
        }
        if (channels.size() != arr.shape[2]) fail(Errc::InvalidValue, item.payload + ": channel count mismatch");
        posepost::LandmarkClip clip(arr.shape[0], arr.shape[1], std::move(channels));
        clip.data = arr.data;
        clip.space = posepost::space_from_string(item.pose.at("space").get<std::string>()).value_or(posepost::Space::FrameNormalized);
        clip.backend_name = item.pose.at("backend").get<std::string>();
        clip.fps = item.pose.at("fps").get<double>();
        clip.sample_id = item.sample_id;
        return clip;
    }

    config::PostprocessConfig cfg_;
    std::optional<posepost::KeypointPreset> preset_;
};

// ---- exporter ---------------------------------------------------------------------------

class WebDatasetExporter final : public Exporter {
public:
    explicit WebDatasetExporter(const JobConfig& cfg) : cfg_(cfg) {}

    shards::ShardIndex write(std::span<const Item> items, const fs::path& in_dir, const fs::path& out_dir,
                             int worker_id) const override {
        shards::ShardWriter writer({cfg_.output.max_samples_per_shard, cfg_.output.max_bytes_per_shard, worker_id},
                                   out_dir);
        for (const auto& item : items) {
            std::map<std::string, std::string> payloads;
            std::string bytes = read_file(in_dir / item.payload);
            if (item.payload_ext == "pose.npy") {
                // intermediates keep f8; shards carry f4
                const auto arr = npy::decode_array(bytes);
                bytes = npy::encode_array(arr.data, arr.shape, npy::ElementKind::F4);
            }
            payloads.emplace(item.payload_ext, std::move(bytes));
            const auto meta =
                shards::sample_metadata(item.sample_id, item.video_id, item.start_s, item.end_s, item.processor, item.split);
            writer.add(shards::make_sample(item.sample_id, meta, item.text, std::move(payloads)));
        }
        return writer.finish();
    }

private:
    const JobConfig& cfg_;
};

}  // namespace

Json to_json(const Item& item) {
    return {{"ordinal", item.ordinal},       {"sample_id", item.sample_id},
            {"video_id", item.video_id},     {"start_s", item.start_s},
            {"end_s", item.end_s},           {"text", optional_string(item.text)},
            {"split", optional_string(item.split)}, {"processor", item.processor},
            {"payload", item.payload},       {"payload_ext", item.payload_ext},
            {"pose", item.pose}};
}

Item item_from_json(const Json& t) {
    try {
        Item item;
        item.ordinal = t.at("ordinal").get<std::size_t>();
        item.sample_id = t.at("sample_id").get<std::string>();
        item.video_id = t.at("video_id").get<std::string>();
        item.start_s = t.at("start_s").get<double>();
        item.end_s = t.at("end_s").get<double>();
        item.text = read_optional_string(t, "text");
        item.split = read_optional_string(t, "split");
        item.processor = t.at("processor").get<std::string>();
        item.payload = t.at("payload").get<std::string>();
        item.payload_ext = t.at("payload_ext").get<std::string>();
        item.pose = t.value("pose", Json());
        return item;
    } catch (const Json::exception& e) {
        fail(Errc::InvalidValue, std::string("malformed stage item: ") + e.what());
    }
}

std::vector<std::string> Registries::list(registry::Kind kind) const {
    switch (kind) {
        case registry::Kind::Dataset: return datasets.list();
        case registry::Kind::Processor: return processors.list();
        case registry::Kind::Postprocessor: return postprocessors.list();
        case registry::Kind::Exporter: return exporters.list();
        case registry::Kind::Extractor: return extractors.list();
        case registry::Kind::MediaIO: return media.list();
        case registry::Kind::Detector: return detectors.list();
    }
    return {};
}

Registries builtin_registries() {
    Registries r;
    for (const auto& name : manifest::builtin_adapter_names()) {
        r.datasets.add(name, [name] { return manifest::make_builtin_adapter(name); });
    }

    r.processors.add("pose", [](const JobConfig& c, const Registries& reg) -> std::unique_ptr<Processor> {
        return std::make_unique<PoseProcessor>(c, reg);
    });
    r.processors.add("video", [](const JobConfig& c, const Registries& reg) -> std::unique_ptr<Processor> {
        return std::make_unique<VideoProcessor>(c, reg);
    });

    r.postprocessors.add("landmark", [](const JobConfig& c) -> std::unique_ptr<Postprocessor> {
        return std::make_unique<LandmarkPostprocessor>(c);
    });
    r.postprocessors.add("passthrough", [](const JobConfig&) -> std::unique_ptr<Postprocessor> {
        return std::make_unique<PassthroughPostprocessor>();
    });

    r.exporters.add("webdataset", [](const JobConfig& c) -> std::unique_ptr<Exporter> {
        return std::make_unique<WebDatasetExporter>(c);
    });

    r.extractors.add("synthetic", extractor::make_synthetic_backend);

    r.media.add("synthetic", [](const config::MediaConfig&) { return mediaio::make_synthetic_media(); });
    r.media.add("external", [](const config::MediaConfig& c) { return mediaio::make_external_media(c); });

    r.detectors.add("scripted", [](const config::DetectorConfig&) -> std::unique_ptr<Detector> {
        return std::make_unique<ScriptedDetector>();
    });
    r.detectors.add("full_frame", [](const config::DetectorConfig&) -> std::unique_ptr<Detector> {
        return std::make_unique<FullFrameDetector>();
    });
    return r;
}

void register_config_backends(Registries& registries, const JobConfig& config) {
    const auto& ex = config.processing.extractor;
    if (ex && ex->command) registries.extractors.add(ex->backend_name, extractor::make_command_backend);
}

std::string processor_name(const JobConfig& config) { return std::string(config::to_string(config.processing.mode)); }

std::string postprocessor_name(const JobConfig& config) {
    if (!config.postprocess.enabled || config.processing.mode == config::Mode::Video) return "passthrough";
    return "landmark";
}

std::string exporter_name(const JobConfig&) { return "webdataset"; }

void check_components(const Registries& registries, const JobConfig& config) {
    registries.datasets.resolve(config.dataset.adapter_name);
    registries.processors.resolve(processor_name(config));
    registries.postprocessors.resolve(postprocessor_name(config));
    registries.exporters.resolve(exporter_name(config));
    if (config.processing.extractor) registries.extractors.resolve(config.processing.extractor->backend_name);
    if (config.processing.detector) registries.detectors.resolve(config.processing.detector->backend_name);
    if (config.processing.media.backend_name != "auto") registries.media.resolve(config.processing.media.backend_name);
    if (config.postprocess.enabled && config.postprocess.preset_name && config.processing.mode == config::Mode::Pose) {
        posepost::resolve_preset(*config.postprocess.preset_name);
    }
}

fs::path video_dir(const JobConfig& config) {
    if (config.dataset.video_dir) return *config.dataset.video_dir;
    return fs::path(config.dataset.source_path).parent_path();
}

}  // namespace signpipe::pipeline
