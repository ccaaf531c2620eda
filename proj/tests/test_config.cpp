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

#include <doctest.h>

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "signpipe/config.hpp"
#include "signpipe/error.hpp"
#include "support/fixtures.hpp"

using namespace signpipe;
using namespace signpipe::config;
namespace sp = signpipe::testing;

namespace {

constexpr const char* kMinimal = R"(job_name: demo
dataset:
  adapter_name: how2sign_csv
  source_path: data/x.csv
processing:
  mode: pose
  extractor:
    backend_name: synthetic
    expected_keypoints: 85
)";

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::StageFailure;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

Json minimal_tree() { return parse_yaml_text(kMinimal); }

JobConfig with(const std::string& path, const Json& value) {
    return job_from_tree(merge_overrides(minimal_tree(), Json{{path, value}}));
}

}  // namespace

// Expected bytes and digest come from json.dumps(sort_keys=True) and hashlib
// (tests/oracles/gen_goldens.py).
TEST_CASE("defaults and canonical bytes of a minimal job") {
    auto c = job_from_tree(minimal_tree());
    CHECK(c.processing.frame_rate_hz == 25.0);
    CHECK(c.postprocess.normalize.visibility_threshold == 0.5);
    CHECK(c.postprocess.normalize.epsilon == 1e-6);
    CHECK(c.filter.min_duration_s == 0.5);
    CHECK(c.filter.max_duration_s == 60.0);
    CHECK(c.output.max_samples_per_shard == 1000);
    CHECK(c.output.max_bytes_per_shard == 1073741824);
    CHECK(c.runtime.workers == 1);
    CHECK(c.runtime.resume);
    CHECK(c.processing.extractor->channels == 4);

    const std::string golden =
        R"({"dataset":{"adapter_name":"how2sign_csv","params":{},"source_path":"data/x.csv","video_ext":".mp4"},)"
        R"("filter":{"max_duration_s":60.0,"min_duration_s":0.5,"require_text":true,"require_timing":true},)"
        R"("job_name":"demo","output":{"format":"webdataset","max_bytes_per_shard":1073741824,"max_samples_per_shard":1000},)"
        R"("postprocess":{"enabled":true,"flatten":false,"keep_depth":true,"mask_invisible":false,)"
        R"("normalize":{"epsilon":1e-06,"scope":"per_clip","visibility_threshold":0.5}},)"
        R"("processing":{"extractor":{"backend_name":"synthetic","channels":4,"expected_keypoints":85,"params":{}},)"
        R"("frame_rate_hz":25.0,"media":{"backend_name":"auto","output_ext":"mp4",)"
        R"("probe_command":"ffprobe -v error -select_streams v:0 -show_entries stream=width,height,r_frame_rate:format=duration -of json {input}",)"
        R"("render_command":"ffmpeg -y -loglevel error -ss {start} -to {end} -i {input} -vf crop={w}:{h}:{x}:{y},scale={out_w}:{out_h} -an {output}"},)"
        R"("mode":"pose"},"runtime":{"output_root":"runs","resume":true,"seed":0,"workers":1}})";
    CHECK(canonical_serialize(c) == golden);
    CHECK(to_hex(config_hash(c)) == "bae3ff7a264750f264ed9312b18789f7f38d867688db4c24896267ae4d0912f0");
}

TEST_CASE("load_config reads YAML files") {
    sp::TempDir dir;
    sp::write_file(dir / "job.yaml", kMinimal);
    auto c = load_config(dir / "job.yaml");
    CHECK(c.job_name == "demo");
    CHECK(c.dataset.adapter_name == "how2sign_csv");
    auto o = load_config(dir / "job.yaml", Json{{"runtime.workers", 3}});
    CHECK(o.runtime.workers == 3);
    CHECK(code_of([&] { load_config(dir / "missing.yaml"); }) == Errc::ParseError);
    sp::write_file(dir / "bad.yaml", "job_name: [unclosed\n");
    CHECK(code_of([&] { load_config(dir / "bad.yaml"); }) == Errc::ParseError);
    sp::write_file(dir / "dup.yaml", "job_name: a\njob_name: b\n");
    CHECK(code_of([&] { load_config(dir / "dup.yaml"); }) == Errc::ParseError);
}

TEST_CASE("validation errors") {
    CHECK(code_of([] { with("processing.mode", "audio"); }) == Errc::InvalidValue);
    CHECK(code_of([] { job_from_tree(merge_overrides(minimal_tree(), {{"filter.min_duration_s", 10}, {"filter.max_duration_s", 5}})); }) ==
          Errc::InvalidValue);
    CHECK(code_of([] { with("processing.frame_rate_hz", 0); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("processing.extractor.channels", 5); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("processing.extractor.expected_keypoints", 0); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("runtime.workers", 0); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("runtime.seed", -1); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("runtime.workers", "four"); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("postprocess.normalize.scope", "per_video"); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("postprocess.normalize.visibility_threshold", 1.5); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("postprocess.normalize.epsilon", 0.0); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("output.format", "tfrecord"); }) == Errc::InvalidValue);
    CHECK(code_of([] { with("processing.mode", "video"); }) == Errc::InvalidValue);  // video needs crop

    auto no_extractor = minimal_tree();
    no_extractor["processing"].erase("extractor");
    CHECK(code_of([&] { job_from_tree(no_extractor); }) == Errc::InvalidValue);

    auto typo = minimal_tree();
    typo["runtime"] = {{"wrokers", 2}};
    CHECK(code_of([&] { job_from_tree(typo); }) == Errc::UnknownField);
    CHECK(message_of([&] { job_from_tree(typo); }).find("runtime.wrokers") != std::string::npos);

    auto top = minimal_tree();
    top["extra"] = 1;
    CHECK(code_of([&] { job_from_tree(top); }) == Errc::UnknownField);
}

TEST_CASE("video mode with crop validates") {
    auto c = job_from_tree(merge_overrides(minimal_tree(), {{"processing.mode", "video"},
                                                            {"processing.crop", {{"pad_fraction", 0.2}, {"target_aspect", 1.0}}},
                                                            {"processing.crop.resize", {{"width", 224}, {"height", 224}}}}));
    CHECK(c.processing.mode == Mode::Video);
    CHECK(c.processing.crop->pad_fraction == 0.2);
    CHECK(c.processing.crop->resize->width == 224);
}

TEST_CASE("canonical bytes ignore key order and track values") {
    sp::TempDir dir;
    sp::write_file(dir / "a.yaml", kMinimal);
    sp::write_file(dir / "b.yaml", R"(processing:
  extractor:
    expected_keypoints: 85
    backend_name: synthetic
  mode: pose
dataset:
  source_path: data/x.csv
  adapter_name: how2sign_csv
job_name: demo
)");
    auto a = load_config(dir / "a.yaml");
    auto b = load_config(dir / "b.yaml");
    CHECK(canonical_serialize(a) == canonical_serialize(b));
    CHECK(canonical_serialize(with("runtime.seed", 7)) != canonical_serialize(with("runtime.seed", 8)));
    auto s = canonical_serialize(a);
    CHECK(canonical_serialize(job_from_tree(parse_yaml_text(s))) == s);
}

TEST_CASE("merge_overrides") {
    Json base = {{"runtime", {{"workers", 1}, {"seed", 7}}}};
    CHECK(merge_overrides(base, {{"runtime.workers", 4}}) == Json{{"runtime", {{"workers", 4}, {"seed", 7}}}});
    CHECK(merge_overrides(base, Json::object()) == base);

    Json with_list = minimal_tree();
    with_list["dataset"]["params"] = {{"aliases", {{"text", {"A", "B", "C"}}}}};
    auto merged = merge_overrides(with_list, {{"dataset.params.aliases.text", {"Z"}}});
    CHECK(merged["dataset"]["params"]["aliases"]["text"] == Json{"Z"});

    auto subtree = merge_overrides(minimal_tree(), {{"runtime", {{"seed", 3}}}});
    CHECK(subtree["runtime"]["seed"] == 3);
    CHECK(code_of([] { merge_overrides(minimal_tree(), {{"runtime.threads", 2}}); }) == Errc::UnknownField);
    CHECK(code_of([] { merge_overrides(minimal_tree(), {{"job_name.first", "x"}}); }) == Errc::UnknownField);
    CHECK(code_of([] { merge_overrides(minimal_tree(), {{"runtime..seed", 1}}); }) == Errc::UnknownField);
}

TEST_CASE("parse_scalar types override values") {
    CHECK(parse_scalar("4") == Json(4));
    CHECK(parse_scalar("0.5") == Json(0.5));
    CHECK(parse_scalar("abc") == Json("abc"));
    CHECK(parse_scalar("true") == Json(true));
    CHECK(parse_scalar("[1, 2]") == Json({1, 2}));
    CHECK(parse_scalar("\"4\"") == Json("4"));
}

TEST_CASE("config_hash sections") {
    auto a = with("runtime.workers", 1);
    auto b = with("runtime.workers", 4);
    CHECK(config_hash(a) == config_hash(a));
    CHECK(config_hash(a, "postprocess") == config_hash(b, "postprocess"));
    CHECK(config_hash(a, "runtime") != config_hash(b, "runtime"));
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(with("postprocess.flatten", true), "postprocess") != config_hash(a, "postprocess"));
    CHECK(config_hash(a, "processing.crop") == config_hash(b, "processing.crop"));  // absent on both
    CHECK(code_of([&] { config_hash(a, "nonsense"); }) == Errc::UnknownField);
}

namespace {

struct Candidate {
    const char* path;
    std::vector<Json> values;
};

const std::vector<Candidate>& candidates() {
    static const std::vector<Candidate> c = {
        {"runtime.workers", {1, 2, 3, 8}},
        {"runtime.seed", {0, 7, 123456789}},
        {"runtime.resume", {true, false}},
        {"postprocess.flatten", {true, false}},
        {"postprocess.mask_invisible", {true, false}},
        {"postprocess.normalize.scope", {"per_clip", "per_frame"}},
        {"postprocess.normalize.visibility_threshold", {0.0, 0.25, 0.5, 1.0}},
        {"filter.min_duration_s", {0.0, 0.1, 0.5}},
        {"filter.max_duration_s", {10.0, 60.0, 1e3}},
        {"filter.require_text", {true, false}},
        {"processing.frame_rate_hz", {12.5, 25.0, 29.97}},
        {"output.max_samples_per_shard", {1, 100, 1000}},
        {"dataset.params.delimiter", {",", "tab"}},
        {"job_name", {"demo", "j\xC3\xA9", "a b"}},
    };
    return c;
}

Json random_overrides(std::mt19937_64& rng, std::vector<std::size_t>& used) {
    Json o = Json::object();
    const auto& c = candidates();
    std::size_t n = rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
        auto pick = rng() % c.size();
        if (std::find(used.begin(), used.end(), pick) != used.end()) continue;
        used.push_back(pick);
        o[c[pick].path] = c[pick].values[rng() % c[pick].values.size()];
    }
    return o;
}

}  // namespace

TEST_CASE("property: merges over disjoint paths commute") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 500; ++round) {
        std::vector<std::size_t> used;
        auto o1 = random_overrides(rng, used);
        auto o2 = random_overrides(rng, used);
        auto ab = merge_overrides(merge_overrides(minimal_tree(), o1), o2);
        auto ba = merge_overrides(merge_overrides(minimal_tree(), o2), o1);
        CHECK(ab == ba);
    }
}

TEST_CASE("property: load(serialize(c)) reproduces the canonical bytes") {
    std::mt19937_64 rng(6);
    for (int round = 0; round < 300; ++round) {
        std::vector<std::size_t> used;
        auto tree = merge_overrides(minimal_tree(), random_overrides(rng, used));
        JobConfig c;
        try {
            c = job_from_tree(tree);
        } catch (const Error&) {
            continue;  // e.g. min >= max
        }
        auto bytes = canonical_serialize(c);
        CHECK(canonical_serialize(job_from_tree(parse_yaml_text(bytes))) == bytes);
    }
}

TEST_CASE("property: every load returns a config or exactly one typed error") {
    std::mt19937_64 rng(8);
    const std::vector<std::string> paths = {
        "job_name", "dataset", "dataset.adapter_name", "dataset.params", "processing", "processing.mode",
        "processing.frame_rate_hz", "processing.extractor", "processing.extractor.channels", "processing.detector",
        "processing.detector.sample_stride", "processing.crop", "processing.crop.resize", "processing.crop.resize.width",
        "postprocess.enabled", "postprocess.normalize", "postprocess.normalize.epsilon", "filter", "filter.min_duration_s",
        "output.max_bytes_per_shard", "runtime", "runtime.seed", "runtime.output_root", "processing.media.backend_name"};
    const std::vector<Json> values = {nullptr, true, 0, -3, 2, 18446744073709551615ULL, 0.5, -1.5, 1e300, "", "x",
                                      "pose", Json::array(), Json::array({1, 2}), Json::object(),
                                      Json{{"width", 10}, {"height", 0}}, Json{{"bogus", 1}}};
    int valid = 0;
    for (int round = 0; round < 2000; ++round) {
        auto tree = minimal_tree();
        std::size_t edits = 1 + rng() % 3;
        for (std::size_t i = 0; i < edits; ++i) {
            tree = merge_overrides(tree, Json{{paths[rng() % paths.size()], values[rng() % values.size()]}});
        }
        try {
            auto c = job_from_tree(tree);
            ++valid;
            CHECK(canonical_serialize(job_from_tree(to_tree(c))) == canonical_serialize(c));
        } catch (const Error& e) {
            CHECK(std::string(e.what()).size() > 0);
        } catch (const std::exception& e) {
            FAIL("untyped exception: " << e.what());
        }
    }
    CHECK(valid > 0);
}

TEST_CASE("experiments") {
    sp::TempDir dir;
    sp::write_file(dir / "base.yaml", kMinimal);
    sp::write_file(dir / "exp.yaml", R"(experiment_name: ablation
continue_on_error: true
jobs:
  - base: base.yaml
    overrides:
      postprocess.flatten: true
  - base:
      job_name: inline
      dataset: {adapter_name: how2sign_csv, source_path: x.csv}
      processing: {mode: pose, extractor: {backend_name: synthetic, expected_keypoints: 85}}
    overrides:
      runtime.workers: 2
)");
    auto exp = load_experiment(dir / "exp.yaml");
    CHECK(exp.experiment_name == "ablation");
    CHECK(exp.continue_on_error);
    REQUIRE(exp.jobs.size() == 2);
    auto jobs = resolve_jobs(exp);
    CHECK(jobs[0].job_name == "demo");
    CHECK(jobs[0].postprocess.flatten);
    CHECK(jobs[1].job_name == "inline");
    CHECK(jobs[1].runtime.workers == 2);

    sp::write_file(dir / "empty.yaml", "experiment_name: e\njobs: []\n");
    CHECK(code_of([&] { load_experiment(dir / "empty.yaml"); }) == Errc::InvalidValue);
    sp::write_file(dir / "badpath.yaml", "experiment_name: e\njobs:\n  - base: base.yaml\n    overrides: {runtime.nope: 1}\n");
    CHECK(code_of([&] { load_experiment(dir / "badpath.yaml"); }) == Errc::UnknownField);
    sp::write_file(dir / "badval.yaml",
                   "experiment_name: e\njobs:\n  - base: base.yaml\n  - base: base.yaml\n    overrides: {runtime.workers: 0}\n");
    auto bad = load_experiment(dir / "badval.yaml");
    CHECK(code_of([&] { resolve_jobs(bad); }) == Errc::InvalidValue);
    CHECK(message_of([&] { resolve_jobs(bad); }).find("jobs[1]") != std::string::npos);
}
