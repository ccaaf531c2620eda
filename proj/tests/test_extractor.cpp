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
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "signpipe/error.hpp"
#include "signpipe/extractor.hpp"
#include "support/fixtures.hpp"

using namespace signpipe;
using namespace signpipe::extractor;
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

std::vector<FrameRequest> frames_for(const std::string& sample_id, std::int64_t count) {
    std::vector<FrameRequest> out;
    for (std::int64_t i = 0; i < count; ++i) {
        FrameRequest f;
        f.index = i;
        f.width = 640;
        f.height = 480;
        f.sample_id = sample_id;
        f.path = "videos/x.synth.json";
        f.frame_index = i * 2;
        out.push_back(f);
    }
    return out;
}

ExtractorSpec fake_spec(const std::string& mode, int keypoints = 5, int channels = 4) {
    ExtractorSpec spec;
    spec.backend_name = "fake";
    spec.command = sp::env_or("SIGNPIPE_FAKE_BACKEND", "fake_backend") + " " + mode;
    spec.expected_keypoints = keypoints;
    spec.channels = channels;
    return spec;
}

posepost::LandmarkClip run_fake(const std::string& mode, std::int64_t frames = 3) {
    auto spec = fake_spec(mode);
    auto backend = make_command_backend(spec);
    auto ready = handshake(*backend, spec);
    auto reqs = frames_for("clip", frames);
    return extract_clip(*backend, reqs, spec, ready);
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

// Values from hashlib in tests/oracles/gen_goldens.py.
TEST_CASE("synthetic_keypoint goldens") {
    CHECK(synthetic_keypoint(0, "s", 0, 0, 0) == 0x1.4fa110553fe68p-1);
    CHECK(synthetic_keypoint(0, "s", 0, 1, 0) == 0x1.a7453d4183ad2p-2);
    CHECK(synthetic_keypoint(42, "vid0000_seg000", 3, 17, 2) == 0x1.3527c7fd987e4p-3);
    CHECK(synthetic_keypoint(7, "", 0, 0, 0) == 0x1.81d30bb69729cp-2);
    CHECK(synthetic_keypoint(18446744073709551615ULL, "\xC3\xBCn\xC3\xAF", 100, 84, 3) == 0x1.78e0369bc4f18p-4);
    CHECK(synthetic_keypoint(1, "a b", 12345, 531, 1) == 0x1.62b93f7d4a640p-7);
}

TEST_CASE("property: synthetic values lie in [0,1) and neighbours differ") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5000; ++i) {
        auto seed = rng();
        auto id = "s" + std::to_string(rng() % 1000);
        auto f = static_cast<std::int64_t>(rng() % 10000);
        auto k = static_cast<std::int64_t>(rng() % 600);
        double v = synthetic_keypoint(seed, id, f, k, 0);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        CHECK(v != synthetic_keypoint(seed, id, f, k + 1, 0));
    }
}

TEST_CASE("parallel synthetic_block equals the serial reference") {
    std::vector<std::int64_t> frames;
    for (std::int64_t f = 0; f < 40; ++f) frames.push_back(f * 3 + 1);
    for (int channels : {2, 3, 4}) {
        auto par = synthetic_block(9, "clip", frames, 85, channels);
        auto ser = reference::synthetic_block(9, "clip", frames, 85, channels);
        CHECK(par == ser);
        CHECK(par[static_cast<std::size_t>((85 + 1) * channels + 1)] == synthetic_keypoint(9, "clip", frames[1], 1, 1));
    }
    std::vector<std::int64_t> small{5};
    CHECK(synthetic_block(1, "x", small, 2, 2) == reference::synthetic_block(1, "x", small, 2, 2));
}

TEST_CASE("protocol messages encode canonically") {
    CHECK(protocol::encode(protocol::End{}) == R"({"type":"end"})");
    CHECK(protocol::encode(protocol::Done{}) == R"({"type":"done"})");
    CHECK(protocol::encode(Handshake{85, 4, "synthetic"}) ==
          R"({"backend":"synthetic","channels":4,"num_keypoints":85,"type":"ready"})");
    LandmarkResponse none;
    none.index = 4;
    none.no_detection = true;
    CHECK(protocol::encode(none) == R"({"index":4,"type":"no_detection"})");
    CHECK(protocol::encode(protocol::BackendError{"boom"}) == R"({"message":"boom","type":"error"})");
}

TEST_CASE("property: protocol round trip is identity") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coord(-5, 1000);
    for (int round = 0; round < 300; ++round) {
        FrameRequest f;
        f.index = static_cast<std::int64_t>(rng() % 100000);
        f.width = 1 + static_cast<int>(rng() % 8);
        f.height = 1 + static_cast<int>(rng() % 8);
        f.sample_id = "s" + std::to_string(rng() % 50) + (rng() % 2 ? " \xC3\xA9" : "");
        if (rng() % 2) f.bbox = geometry::Box{coord(rng), coord(rng), coord(rng), coord(rng)};
        if (rng() % 2) {
            f.transport = Transport::InlineRgb;
            f.rgb.resize(static_cast<std::size_t>(f.width * f.height * 3));
            for (auto& ch : f.rgb) ch = static_cast<char>(rng() & 0xFF);
        } else {
            f.path = "videos/v" + std::to_string(rng() % 9) + ".mp4";
            f.frame_index = static_cast<std::int64_t>(rng() % 5000);
        }
        auto line = protocol::encode(f);
        CHECK(line.find('\n') == std::string::npos);
        auto back = protocol::decode_client(line);
        REQUIRE(std::holds_alternative<FrameRequest>(back));
        CHECK(std::get<FrameRequest>(back) == f);

        LandmarkResponse r;
        r.index = f.index;
        if (rng() % 5 == 0) {
            r.no_detection = true;
        } else {
            r.keypoints.resize(1 + rng() % 10);
            int c = 2 + static_cast<int>(rng() % 3);
            for (auto& row : r.keypoints) {
                for (int i = 0; i < c; ++i) row.push_back(rng() % 7 == 0 ? 1.0 : coord(rng));
            }
        }
        auto decoded = protocol::decode_backend(protocol::encode(r));
        REQUIRE(std::holds_alternative<LandmarkResponse>(decoded));
        CHECK(std::get<LandmarkResponse>(decoded) == r);
    }
    protocol::Init init{"synthetic", 85, 4, Json{{"seed", 3}}};
    auto back = std::get<protocol::Init>(protocol::decode_client(protocol::encode(init)));
    CHECK(back.backend == "synthetic");
    CHECK(back.expected_keypoints == 85);
    CHECK(back.params == init.params);
}

TEST_CASE("malformed protocol lines are ProtocolError") {
    for (const char* line : {"", "{not json", "[]", R"({"index":1})", R"({"type":"warp"})",
                             R"({"type":"end","extra":1})",
                             R"({"type":"frame","index":0,"width":2,"height":1,"transport":"inline_rgb","payload":"AAAA"})",
                             R"({"type":"frame","index":0,"width":2,"height":1,"transport":"smoke","payload":{}})",
                             R"({"type":"frame","index":"0","width":2,"height":1,"transport":"file_ref","payload":{"path":"a","frame_index":0}})"}) {
        CAPTURE(line);
        CHECK(code_of([&] { protocol::decode_client(line); }) == Errc::ProtocolError);
    }
    for (const char* line : {"{}", R"({"type":"ready","num_keypoints":1})", R"({"type":"landmarks","index":0,"keypoints":3})",
                             R"({"type":"landmarks","index":0,"keypoints":[["x"]]})", R"({"type":"frame"})"}) {
        CAPTURE(line);
        CHECK(code_of([&] { protocol::decode_backend(line); }) == Errc::ProtocolError);
    }
}

TEST_CASE("recorded conformance transcript replays byte for byte") {
    const auto dir = sp::fixtures_dir() / "protocol";
    const auto requests = sp::read_file(dir / "synthetic_requests.jsonl");
    const auto expected = sp::read_file(dir / "synthetic_responses.jsonl");

    std::FILE* in = fmemopen(const_cast<char*>(requests.data()), requests.size(), "r");
    char* buffer = nullptr;
    std::size_t size = 0;
    std::FILE* out = open_memstream(&buffer, &size);
    REQUIRE(in);
    REQUIRE(out);
    CHECK(serve_synthetic(in, out) == 0);
    std::fclose(in);
    std::fclose(out);
    std::string produced(buffer, size);
    std::free(buffer);
    CHECK(produced == expected);

    // Every recorded line is canonical: decoding and re-encoding reproduces it.
    for (const auto& line : lines_of(requests)) {
        std::visit([&](const auto& m) { CHECK(protocol::encode(m) == line); }, protocol::decode_client(line));
    }
    std::set<std::int64_t> sent;
    std::set<std::int64_t> answered;
    for (const auto& line : lines_of(requests)) {
        auto m = protocol::decode_client(line);
        if (auto* f = std::get_if<FrameRequest>(&m)) sent.insert(f->index);
    }
    for (const auto& line : lines_of(expected)) {
        auto m = protocol::decode_backend(line);
        std::visit([&](const auto& msg) { CHECK(protocol::encode(msg) == line); }, m);
        if (auto* r = std::get_if<LandmarkResponse>(&m)) answered.insert(r->index);
    }
    CHECK(sent == answered);
}

TEST_CASE("the synthetic server reports errors as a final line") {
    std::string requests = "{\"type\":\"end\"}\n";
    std::FILE* in = fmemopen(requests.data(), requests.size(), "r");
    char* buffer = nullptr;
    std::size_t size = 0;
    std::FILE* out = open_memstream(&buffer, &size);
    CHECK(serve_synthetic(in, out) != 0);
    std::fclose(in);
    std::fclose(out);
    std::string produced(buffer, size);
    std::free(buffer);
    auto msg = protocol::decode_backend(lines_of(produced).back());
    CHECK(std::holds_alternative<protocol::BackendError>(msg));
}

TEST_CASE("synthetic handshake and extraction") {
    ExtractorSpec spec{"synthetic", std::nullopt, Json::object(), 85, 4};
    auto backend = make_synthetic_backend(spec);
    auto ready = handshake(*backend, spec);
    CHECK(ready == Handshake{85, 4, "synthetic"});

    auto reqs = frames_for("clip_a", 3);
    auto clip = extract_clip(*backend, reqs, spec, ready);
    CHECK(clip.frames == 3);
    CHECK(clip.keypoints == 85);
    CHECK(clip.channel_count() == 4);
    CHECK(clip.backend_name == "synthetic");
    CHECK(clip.at(2, 84, 3) == synthetic_keypoint(0, "clip_a", 2, 84, 3));
    auto again = extract_clip(*backend, reqs, spec, ready);
    CHECK(again == clip);

    ExtractorSpec seeded = spec;
    seeded.params = Json{{"seed", 11}};
    auto b2 = make_synthetic_backend(seeded);
    auto r2 = handshake(*b2, seeded);
    CHECK(extract_clip(*b2, reqs, seeded, r2).at(0, 0, 0) == synthetic_keypoint(11, "clip_a", 0, 0, 0));

    ExtractorSpec wide = spec;
    wide.expected_keypoints = 532;
    wide.params = Json{{"num_keypoints", 543}};
    auto b3 = make_synthetic_backend(wide);
    CHECK(code_of([&] { handshake(*b3, wide); }) == Errc::HandshakeMismatch);
}

TEST_CASE("command backend: well-behaved and reordered replies give the same clip") {
    auto good = run_fake("good");
    CHECK(good.frames == 3);
    CHECK(good.at(1, 4, 2) == synthetic_keypoint(0, "clip", 1, 4, 2));
    CHECK(run_fake("reverse") == good);
}

TEST_CASE("command backend: no_detection frames are zero with visibility 0") {
    auto clip = run_fake("no_detection");
    for (std::size_t k = 0; k < clip.keypoints; ++k) {
        for (std::size_t c = 0; c < clip.channel_count(); ++c) CHECK(clip.at(1, k, c) == 0.0);
        CHECK(clip.at(0, k, 3) == synthetic_keypoint(0, "clip", 0, static_cast<std::int64_t>(k), 3));
    }
}

TEST_CASE("command backend failures") {
    CHECK(code_of([] { run_fake("short"); }) == Errc::ProtocolError);
    CHECK(code_of([] { run_fake("garbage"); }) == Errc::ProtocolError);
    CHECK(code_of([] { run_fake("crash"); }) == Errc::BackendCrash);
    CHECK(code_of([] { run_fake("error"); }) == Errc::BackendCrash);
    CHECK(code_of([] { run_fake("silent"); }) == Errc::ProtocolError);

    auto spec = fake_spec("mismatch", 532, 4);
    auto backend = make_command_backend(spec);
    CHECK(code_of([&] { handshake(*backend, spec); }) == Errc::HandshakeMismatch);

    ExtractorSpec missing{"ghost", std::string("/nonexistent/bin/ghost-extractor --serve"), Json::object(), 5, 4};
    CHECK(code_of([&] {
              auto b = make_command_backend(missing);
              handshake(*b, missing);
          }) == Errc::SpawnFailure);
}

TEST_CASE("session restarts the backend after a crash") {
    auto spec = fake_spec("crash");
    ExtractorSession session(make_command_backend, spec);
    auto reqs = frames_for("clip", 2);
    CHECK(code_of([&] { session.extract(reqs, std::nullopt); }) == Errc::BackendCrash);
    CHECK(session.restarts() == 1);
    CHECK(code_of([&] { session.extract(reqs, std::nullopt); }) == Errc::BackendCrash);
    CHECK(session.restarts() == 2);
}

TEST_CASE("the external synthetic backend matches the in-process one") {
    ExtractorSpec spec{"synthetic-cmd", sp::env_or("SIGNPIPE_SYNTH_BACKEND", "signpipe-synth-backend"),
                       Json{{"seed", 7}}, 85, 4};
    ExtractorSession external(make_command_backend, spec);
    ExtractorSession internal(make_synthetic_backend, spec);
    auto reqs = frames_for("vid0001_seg002", 20);
    auto a = external.extract(reqs, geometry::Box{1, 2, 3, 4});
    auto b = internal.extract(reqs, geometry::Box{1, 2, 3, 4});
    CHECK(a.data == b.data);
    // A second batch on the same session.
    auto c = external.extract(frames_for("other", 4), std::nullopt);
    CHECK(c.at(3, 0, 0) == synthetic_keypoint(7, "other", 3, 0, 0));
}

TEST_CASE("extract_clip input checks") {
    ExtractorSpec spec{"synthetic", std::nullopt, Json::object(), 4, 2};
    auto backend = make_synthetic_backend(spec);
    auto ready = handshake(*backend, spec);
    std::vector<FrameRequest> none;
    CHECK(code_of([&] { extract_clip(*backend, none, spec, ready); }) == Errc::InvalidValue);
    auto dup = frames_for("x", 2);
    dup[1].index = 0;
    CHECK(code_of([&] { extract_clip(*backend, dup, spec, ready); }) == Errc::InvalidValue);
}
