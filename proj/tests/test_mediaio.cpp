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

#include <cmath>
#include <functional>
#include <random>

#include "signpipe/child_process.hpp"
#include "signpipe/error.hpp"
#include "signpipe/mediaio.hpp"
#include "support/fixtures.hpp"

using namespace signpipe;
using namespace signpipe::mediaio;
namespace sp = signpipe::testing;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::StageFailure;
}

constexpr const char* kClip = R"({"duration_s": 4.0, "fps": 25, "width": 640, "height": 480,
  "scene": [{"start_s": 0.0, "end_s": 2.0, "boxes": [[100, 50, 300, 450]]},
            {"start_s": 1.0, "end_s": 1.5, "boxes": [[400, 60, 600, 470]], "scores": [0.2]}]})";

}  // namespace

TEST_CASE("command templates") {
    CHECK(process::split_command("a  'b c' \"d e\" f") == std::vector<std::string>{"a", "b c", "d e", "f"});
    CHECK(process::split_command("").empty());
    CHECK(process::substitute({"-i", "{input}", "x{w}x{w}", "{unknown}"}, {{"input", "in.mp4"}, {"w", "3"}}) ==
          std::vector<std::string>{"-i", "in.mp4", "x3x3", "{unknown}"});
    auto r = process::run_command({"sh", "-c", "echo out; echo err >&2; exit 3"});
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("out") != std::string::npos);
    CHECK(r.output.find("err") != std::string::npos);
    CHECK(code_of([] { process::run_command({"/nonexistent/program"}); }) == Errc::SpawnFailure);
}

TEST_CASE("synthetic probe") {
    sp::TempDir dir;
    auto path = dir / "v.synth.json";
    sp::write_file(path, kClip);
    auto media = make_synthetic_media();
    CHECK(media->probe(path) == MediaInfo{4.0, 25.0, 640, 480});
    CHECK(is_synthetic_path(path));
    CHECK_FALSE(is_synthetic_path(dir / "v.mp4"));

    CHECK(code_of([&] { media->probe(dir / "missing.synth.json"); }) == Errc::Unreadable);
    sp::write_file(dir / "junk.synth.json", "{not json");
    CHECK(code_of([&] { media->probe(dir / "junk.synth.json"); }) == Errc::Unreadable);
    for (const char* bad : {R"({"duration_s": 0, "fps": 25, "width": 1, "height": 1})",
                            R"({"duration_s": 1, "fps": -1, "width": 1, "height": 1})",
                            R"({"duration_s": 1, "fps": 25, "width": 0, "height": 1})",
                            R"({"duration_s": 1, "fps": 25, "width": 1})",
                            R"({"duration_s": 1, "fps": 25, "width": 10, "height": 10, "scene": [{"start_s": 0, "end_s": 1, "boxes": [[0, 0, 20, 5]]}]})"}) {
        sp::write_file(dir / "bad.synth.json", bad);
        CHECK(code_of([&] { media->probe(dir / "bad.synth.json"); }) == Errc::BadMetadata);
    }
}

TEST_CASE("synthetic media JSON round trip") {
    auto m = synthetic_media_from_json(Json::parse(kClip));
    REQUIRE(m.scene.size() == 2);
    CHECK(m.scene[0].scores == std::vector<double>{1.0});
    auto again = synthetic_media_from_json(to_json(m));
    CHECK(again.info == m.info);
    CHECK(again.scene[1].boxes == m.scene[1].boxes);
    CHECK(again.scene[1].scores == m.scene[1].scores);
}

TEST_CASE("sample_times examples") {
    CHECK(sample_times(0.0, 1.0, 4.0) == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    CHECK(sample_times(1.0, 1.1, 4.0) == std::vector<double>{1.0});
    CHECK(sample_times(2.0, 2.5, 2.0) == std::vector<double>{2.0});
    CHECK(code_of([] { sample_times(1.0, 1.0, 25.0); }) == Errc::InvalidRange);
    CHECK(code_of([] { sample_times(2.0, 1.0, 25.0); }) == Errc::InvalidRange);
    CHECK(code_of([] { sample_times(0.0, 1.0, 0.0); }) == Errc::InvalidRange);
    CHECK(code_of([] { sample_times(0.0, NAN, 1.0); }) == Errc::InvalidRange);
}

TEST_CASE("property: sample_times matches a direct enumeration") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> start(0.0, 100.0), len(0.001, 20.0), rate(0.5, 60.0);
    for (int round = 0; round < 1000; ++round) {
        const double s = start(rng), e = s + len(rng), hz = rate(rng);
        std::vector<double> expect;
        for (long i = 0;; ++i) {
            double t = s + static_cast<double>(i) / hz;
            if (i > 0 && t >= e) break;
            expect.push_back(t);
        }
        auto got = sample_times(s, e, hz);
        CHECK(got == expect);
        CHECK(got.front() == s);
        for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i] > got[i - 1]);
        CHECK(got.back() < e);
    }
}

TEST_CASE("nearest_frame") {
    MediaInfo info{2.0, 25.0, 10, 10};
    CHECK(nearest_frame(info, 0.0) == 0);
    CHECK(nearest_frame(info, 0.039) == 1);
    CHECK(nearest_frame(info, 0.019) == 0);
    CHECK(nearest_frame(info, 2.0) == 49);
}

TEST_CASE("synthetic decode reports scripted people") {
    sp::TempDir dir;
    auto path = dir / "v.synth.json";
    sp::write_file(path, kClip);
    auto media = make_synthetic_media();
    CHECK(media->decode_frames(path, {}).empty());
    CHECK(media->decode_frames(dir / "missing.synth.json", {}).empty());

    auto frames = media->decode_frames(path, {0.0, 1.2, 3.0});
    REQUIRE(frames.size() == 3);
    CHECK(frames[1].frame_index == 30);
    CHECK(frames[1].width == 640);
    CHECK(frames[0].detections.size() == 1);
    REQUIRE(frames[1].detections.size() == 2);
    CHECK(frames[1].detections[1].score == 0.2);
    CHECK(frames[1].detections[1].frame_index == 1);
    CHECK(frames[2].detections.empty());
    CHECK(code_of([&] { media->decode_frames(path, {5.0}); }) == Errc::DecodeFailure);
    CHECK(code_of([&] { media->decode_frames(path, {-0.1}); }) == Errc::DecodeFailure);
}

TEST_CASE("synthetic render writes its descriptor") {
    sp::TempDir dir;
    auto path = dir / "v.synth.json";
    sp::write_file(path, kClip);
    auto media = make_synthetic_media();
    geometry::CropPlan plan{{9, 9, 21, 21}, 224, 224};
    auto out = dir / ("clip." + media->output_ext());
    media->render_clip(path, 0.5, 1.5, plan, out);
    auto d = render_descriptor_from_json(Json::parse(sp::read_file(out)));
    CHECK(d == RenderDescriptor{"v.synth.json", 0.5, 1.5, plan});
    CHECK(render_descriptor_from_json(to_json(d)) == d);
    CHECK(code_of([&] { media->render_clip(path, 1.5, 1.5, plan, out); }) == Errc::InvalidRange);
    CHECK(code_of([] { render_descriptor_from_json(Json::parse(R"({"input": "a"})")); }) == Errc::BadMetadata);
}

TEST_CASE("render tokens") {
    geometry::CropPlan plan{{9, 9, 21, 21}, 224, 224};
    auto t = render_tokens("in.mp4", 1.5, 3.0, plan, "out.mp4");
    CHECK(t.at("input") == "in.mp4");
    CHECK(t.at("start") == "1.5");
    CHECK(t.at("end") == "3.0");
    CHECK(t.at("x") == "9");
    CHECK(t.at("y") == "9");
    CHECK(t.at("w") == "12");
    CHECK(t.at("h") == "12");
    CHECK(t.at("out_w") == "224");
    CHECK(t.at("out_h") == "224");
    CHECK(t.at("output") == "out.mp4");
}

TEST_CASE("external media backend") {
    sp::TempDir dir;
    auto video = dir / "v.mp4";
    sp::write_file(video, "not really a video");
    sp::write_file(dir / "probe.sh",
                   "echo '{\"streams\":[{\"width\":320,\"height\":240,\"r_frame_rate\":\"30000/1001\"}],"
                   "\"format\":{\"duration\":\"3.5\"}}'\n");
    sp::write_file(dir / "bad_probe.sh", "echo '{\"streams\":[],\"format\":{}}'\n");
    sp::write_file(dir / "render.sh", "printf '%s ' \"$@\" > \"$1\"\n");

    config::MediaConfig cfg;
    cfg.probe_command = "sh " + (dir / "probe.sh").string() + " {input}";
    cfg.render_command = "sh " + (dir / "render.sh").string() + " {output} {input} {start} {end} {w}x{h}";
    cfg.output_ext = "mp4";
    auto media = make_external_media(cfg);
    auto info = media->probe(video);
    CHECK(info.width == 320);
    CHECK(info.height == 240);
    CHECK(info.duration_s == 3.5);
    CHECK(info.fps == doctest::Approx(29.97).epsilon(1e-4));
    CHECK(code_of([&] { media->probe(dir / "missing.mp4"); }) == Errc::Unreadable);

    auto frames = media->decode_frames(video, {0.0, 1.0});
    REQUIRE(frames.size() == 2);
    CHECK(frames[1].frame_index == 30);
    CHECK(frames[1].detections.empty());

    geometry::CropPlan plan{{0, 0, 100, 50}, 100, 50};
    auto out = dir / "out.mp4";
    media->render_clip(video, 0.5, 1.0, plan, out);
    CHECK(sp::read_file(out) == out.string() + " " + video.string() + " 0.5 1.0 100x50 ");

    config::MediaConfig failing = cfg;
    failing.render_command = "false";
    CHECK(code_of([&] { make_external_media(failing)->render_clip(video, 0, 1, plan, out); }) == Errc::CommandFailure);
    failing.render_command = "/nonexistent/renderer {input}";
    CHECK(code_of([&] { make_external_media(failing)->render_clip(video, 0, 1, plan, out); }) == Errc::CommandFailure);

    config::MediaConfig bad = cfg;
    bad.probe_command = "sh " + (dir / "bad_probe.sh").string();
    CHECK(code_of([&] { make_external_media(bad)->probe(video); }) == Errc::BadMetadata);
    bad.probe_command = "false";
    CHECK(code_of([&] { make_external_media(bad)->probe(video); }) == Errc::Unreadable);
    CHECK(code_of([&] { make_external_media(bad)->decode_frames(video, {0.0}); }) == Errc::DecodeFailure);
}
