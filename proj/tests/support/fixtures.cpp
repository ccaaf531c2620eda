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

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "signpipe/canonical_json.hpp"

namespace signpipe::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "signpipe-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

fs::path fixtures_dir() { return env_or("SIGNPIPE_FIXTURES", "tests/fixtures"); }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes;
}

fs::path write_corpus(const fs::path& dir, const CorpusOptions& o) {
    fs::create_directories(dir / "videos");
    const std::size_t videos = (o.segments + o.segments_per_video - 1) / o.segments_per_video;
    const double span = o.segment_s + 1.0;
    for (std::size_t v = 0; v < videos; ++v) {
        Json boxes = Json::array({Json::array({200.0, 100.0, 440.0, 460.0})});
        if (o.multi_person_every && v % o.multi_person_every == o.multi_person_every - 1) {
            boxes.push_back(Json::array({10.0, 20.0, 150.0, 300.0}));
        }
        if (o.empty_every && v % o.empty_every == o.empty_every - 1) boxes = Json::array();
        const double duration = span * static_cast<double>(o.segments_per_video) + 1.0;
        Json media = {{"duration_s", duration},
                      {"fps", 25.0},
                      {"width", 640},
                      {"height", 480},
                      {"scene", Json::array({{{"start_s", 0.0}, {"end_s", duration}, {"boxes", boxes}}})}};
        char name[32];
        std::snprintf(name, sizeof name, "vid%04zu", v);
        write_file(dir / "videos" / (std::string(name) + ".synth.json"), canonical_dump(media));
    }
    std::ostringstream csv;
    csv << "VIDEO_NAME,SENTENCE_NAME,START_REALIGNED,END_REALIGNED,SENTENCE\n";
    for (std::size_t i = 0; i < o.segments; ++i) {
        const std::size_t v = i / o.segments_per_video;
        const double start = 0.5 + span * static_cast<double>(i % o.segments_per_video);
        char vid[32], sid[48];
        std::snprintf(vid, sizeof vid, "vid%04zu", v);
        std::snprintf(sid, sizeof sid, "vid%04zu_seg%03zu", v, i % o.segments_per_video);
        csv << vid << ',' << sid << ',' << format_real(start) << ',' << format_real(start + o.segment_s)
            << ",caption number " << i << '\n';
    }
    write_file(dir / "segments.csv", csv.str());
    return dir / "segments.csv";
}

Json pose_job_tree(const fs::path& corpus_dir, const fs::path& output_root, int workers) {
    return {{"job_name", "fixture"},
            {"dataset",
             {{"adapter_name", "how2sign_csv"},
              {"source_path", (corpus_dir / "segments.csv").string()},
              {"video_dir", (corpus_dir / "videos").string()},
              {"video_ext", ".synth.json"}}},
            {"processing",
             {{"mode", "pose"},
              {"frame_rate_hz", 25.0},
              {"extractor", {{"backend_name", "synthetic"}, {"expected_keypoints", 85}, {"channels", 4}}}}},
            {"postprocess", {{"enabled", true}}},
            {"filter", {{"min_duration_s", 0.5}, {"max_duration_s", 60.0}}},
            {"output", {{"max_samples_per_shard", 16}}},
            {"runtime", {{"workers", workers}, {"seed", 7}, {"resume", true}, {"output_root", output_root.string()}}}};
}

config::JobConfig pose_job(const fs::path& corpus_dir, const fs::path& output_root, int workers) {
    return config::job_from_tree(pose_job_tree(corpus_dir, output_root, workers));
}

geometry::Box random_box(std::mt19937_64& rng, double w, double h) {
    std::uniform_real_distribution<double> ux(0, w), uy(0, h);
    double a = ux(rng), b = ux(rng), c = uy(rng), d = uy(rng);
    return {std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
}

posepost::LandmarkClip random_clip(std::mt19937_64& rng, std::size_t max_frames, std::size_t max_keypoints) {
    std::uniform_int_distribution<std::size_t> tf(1, max_frames), kf(1, max_keypoints);
    std::uniform_int_distribution<int> cf(2, 4);
    std::uniform_real_distribution<double> u(-2.0, 3.0), vis(0.0, 1.0);
    std::bernoulli_distribution constant_axis(0.05), quantize(0.1);
    posepost::LandmarkClip clip(tf(rng), kf(rng), posepost::channels_for_count(cf(rng)));
    const bool flat_x = constant_axis(rng);
    const bool coarse = quantize(rng);
    for (std::size_t t = 0; t < clip.frames; ++t) {
        for (std::size_t k = 0; k < clip.keypoints; ++k) {
            for (std::size_t c = 0; c < clip.channel_count(); ++c) {
                double v = clip.channels[c] == posepost::Channel::Visibility ? vis(rng) : u(rng);
                if (coarse && clip.channels[c] != posepost::Channel::Visibility) v = std::round(v);
                if (flat_x && clip.channels[c] == posepost::Channel::X) v = 0.25;
                clip.at(t, k, c) = v;
            }
        }
    }
    return clip;
}

namespace {

const std::vector<std::string> kWhitespace = {" ", "\t", "\n", "\r", "\xC2\xA0", "\xE3\x80\x80", "\xE2\x80\x83"};
const std::vector<std::string> kWords = {"a", "hello", "Caf\xC3\xA9", "Cafe\xCC\x81", "\xE6\x89\x8B", "42", "-"};

}  // namespace

manifest::ManifestRecord random_record(std::mt19937_64& rng, std::size_t index) {
    manifest::ManifestRecord r;
    r.sample_id = "r" + std::to_string(index);
    r.video_id = "v" + std::to_string(index % 97);
    if (rng() % 10 != 0) {
        std::string text;
        const std::size_t pieces = rng() % 6;
        const bool blank = rng() % 5 == 0;
        for (std::size_t i = 0; i < pieces; ++i) {
            if (blank || rng() % 2) text += kWhitespace[rng() % kWhitespace.size()];
            else text += kWords[rng() % kWords.size()];
        }
        r.text = text;
    }
    std::uniform_real_distribution<double> start(0.0, 500.0);
    const double lengths[] = {0.0, 0.05, 0.3, 0.5, 1.0, 4.0, 59.9, 60.0, 60.1, 300.0};
    if (rng() % 8 != 0) r.start_s = start(rng);
    if (rng() % 8 != 0) {
        const double base = r.start_s.value_or(0.0);
        const double len = rng() % 2 ? lengths[rng() % 10] : std::uniform_real_distribution<double>(0.0, 90.0)(rng);
        r.end_s = base + len;
    }
    if (rng() % 3 == 0) r.split = "train";
    return r;
}

config::FilterConfig random_rules(std::mt19937_64& rng) {
    config::FilterConfig f;
    f.require_text = rng() % 4 != 0;
    f.require_timing = rng() % 4 != 0;
    const double mins[] = {0.0, 0.1, 0.5, 1.0, 5.0};
    const double maxs[] = {10.0, 30.0, 60.0, 120.0};
    f.min_duration_s = mins[rng() % 5];
    f.max_duration_s = maxs[rng() % 4];
    return f;
}

std::optional<std::string> brute_force_reason(const manifest::ManifestRecord& record, const config::FilterConfig& rules) {
    bool blank = true;
    if (record.text) {
        std::string rest = *record.text;
        for (const auto& ws : kWhitespace) {
            for (auto pos = rest.find(ws); pos != std::string::npos; pos = rest.find(ws)) rest.erase(pos, ws.size());
        }
        blank = rest.empty();
    }
    const bool timed = record.start_s.has_value() && record.end_s.has_value();
    if (rules.require_text && blank) return std::string("MissingText");
    if (rules.require_timing && !timed) return std::string("MissingTiming");
    if (timed) {
        const double d = *record.end_s - *record.start_s;
        if (d < rules.min_duration_s) return std::string("TooShort");
        if (d > rules.max_duration_s) return std::string("TooLong");
    }
    return std::nullopt;
}

std::map<int, std::vector<geometry::Detection>> random_detections(std::mt19937_64& rng, int frames, double w, double h) {
    std::map<int, std::vector<geometry::Detection>> out;
    const double scores[] = {0.0, 0.1, 0.2499, 0.25, 0.3, 0.9, 1.0};
    const int max_people = 1 + static_cast<int>(rng() % 3);
    const int sparsity = 1 + static_cast<int>(rng() % 4);
    for (int f = 0; f < frames; ++f) {
        auto& list = out[f];
        if (static_cast<int>(rng() % static_cast<unsigned>(sparsity + 1)) == 0) continue;
        const int people = static_cast<int>(rng() % static_cast<unsigned>(max_people + 1));
        for (int p = 0; p < people; ++p) list.push_back({f, random_box(rng, w, h), scores[rng() % 7]});
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), read_file(e.path()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace signpipe::testing
