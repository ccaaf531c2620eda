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

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "signpipe/error.hpp"
#include "signpipe/hashing.hpp"
#include "signpipe/npy.hpp"
#include "signpipe/shards.hpp"
#include "signpipe/tar.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using namespace signpipe;
using signpipe::testing::TempDir;

namespace {

std::string hex(std::string_view bytes) {
    return to_hex(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::StageFailure;
}

std::string random_bytes(std::mt19937_64& rng, std::size_t n) {
    std::string out(n, '\0');
    for (auto& ch : out) ch = static_cast<char>(rng() & 0xFF);
    return out;
}

std::vector<shards::SampleRecord> numbered_samples(std::size_t n) {
    std::vector<shards::SampleRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto id = "s" + std::to_string(i);
        auto meta = shards::sample_metadata(id, "v", 0.0, 1.0, "pose/synthetic", std::nullopt);
        out.push_back(shards::make_sample(id, meta, "caption " + std::to_string(i), {{"pose.npy", std::string(64, 'x')}}));
    }
    return out;
}

}  // namespace

// Reference bytes were produced with numpy.lib.format.write_array (tests/oracles/gen_goldens.py).
TEST_CASE("npy header matches numpy for (4,85,4) f4") {
    std::vector<double> data(4 * 85 * 4, 0.0);
    auto bytes = npy::encode_array(data, {4, 85, 4});
    const std::string golden =
        "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c2027"
        "7368617065273a2028342c2038352c2034292c207d20202020202020202020202020202020202020202020202020202020202020"
        "20202020202020202020202020202020202020202020200a";
    REQUIRE(bytes.size() == 128 + 4 * 85 * 4 * 4);
    CHECK(hex(bytes.substr(0, 128)) == golden);
}

TEST_CASE("npy files match numpy byte for byte") {
    std::vector<double> one_two{1.0, 2.0};
    CHECK(hex(npy::encode_array(one_two, {1, 2})) ==
          "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c2027"
          "7368617065273a2028312c2032292c207d2020202020202020202020202020202020202020202020202020202020202020202020"
          "20202020202020202020202020202020202020202020200a0000803f00000040");

    auto empty = npy::encode_array({}, {0, 85, 4});
    CHECK(empty.size() == 128);
    CHECK(to_hex(sha256(empty)) == "8c47a101d8a6e6117368625caa66c113e9c65a0f252185aec1d2afa102b8bcca");

    std::vector<double> thirds{0.0, 1.0 / 3, 2.0 / 3, 1.0, 4.0 / 3, 5.0 / 3};
    CHECK(to_hex(sha256(npy::encode_array(thirds, {3, 2}, npy::ElementKind::F8))) ==
          "f52d7a21193fe449c09a1963438938f7104d896634428bceac447059c9b06352");
}

TEST_CASE("npy round trip") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> value(-10, 10);
    for (int round = 0; round < 50; ++round) {
        std::vector<std::size_t> shape{rng() % 6, 1 + rng() % 9, 1 + rng() % 4};
        std::vector<double> data(shape[0] * shape[1] * shape[2]);
        for (auto& v : data) v = value(rng);
        auto f8 = npy::decode_array(npy::encode_array(data, shape, npy::ElementKind::F8));
        CHECK(f8.shape == shape);
        CHECK(f8.kind == npy::ElementKind::F8);
        CHECK(f8.data == data);
        auto f4 = npy::decode_array(npy::encode_array(data, shape));
        REQUIRE(f4.data.size() == data.size());
        for (std::size_t i = 0; i < data.size(); ++i) CHECK(f4.data[i] == static_cast<double>(static_cast<float>(data[i])));
    }
    std::vector<double> one_two{1.0, 2.0};
    auto arr = npy::decode_array(npy::encode_array(one_two, {1, 2}));
    CHECK(arr.data == one_two);
}

TEST_CASE("npy rejects bad input") {
    std::vector<double> three{1, 2, 3};
    CHECK(code_of([&] { npy::encode_array(three, {2, 2}); }) == Errc::InvalidValue);
    CHECK(code_of([] { npy::decode_array("not an array"); }) == Errc::InvalidValue);
    auto good = npy::encode_array(three, {3});
    CHECK(code_of([&] { npy::decode_array(std::string_view(good).substr(0, good.size() - 2)); }) == Errc::InvalidValue);
}

// Python tarfile (USTAR, mtime 0, mode 0644, uid/gid 0, empty names) writes the same member blocks.
TEST_CASE("tar members match python tarfile") {
    std::string bytes;
    std::string npy_like;
    for (int i = 0; i < 200; ++i) npy_like.push_back(static_cast<char>(i));
    bytes += tar::member("key.json", R"({"a":1})");
    bytes += tar::member("key.pose.npy", npy_like);
    bytes += tar::member("key.txt", "hello");
    CHECK(bytes.size() == 3072);
    CHECK(to_hex(sha256(bytes)) == "91727012155f66ec1472f20f3d34f241c58ea90b850c6b2859462d3824c594aa");
}

TEST_CASE("tar parse round trip and long names") {
    std::string long_name(140, 'n');
    long_name += ".pose.npy";
    std::string archive = tar::member("a.json", "{}") + tar::member(long_name, std::string(513, 'z')) +
                          tar::member("empty.txt", "") + tar::trailer();
    auto members = tar::parse(archive);
    REQUIRE(members.size() == 3);
    CHECK(members[0].name == "a.json");
    CHECK(members[1].name == long_name);
    CHECK(members[1].bytes == std::string(513, 'z'));
    CHECK(members[2].bytes.empty());
}

TEST_CASE("tar damage is MalformedShard") {
    std::string archive = tar::member("a.json", "{}") + tar::trailer();
    auto flipped = archive;
    flipped[10] ^= 0x1;
    CHECK(code_of([&] { tar::parse(flipped); }) == Errc::MalformedShard);
    CHECK(code_of([&] { tar::parse(std::string_view(archive).substr(0, 700)); }) == Errc::MalformedShard);
}

TEST_CASE("sanitize_key") {
    CHECK(shards::sanitize_key("abc_DEF-09") == "abc_DEF-09");
    CHECK(shards::sanitize_key("a b/c.d") == "a_b_c_d");
    CHECK(shards::sanitize_key("ü") == "__");
}

TEST_CASE("sample payloads are ordered and metadata is minimal") {
    auto meta = shards::sample_metadata("id.1", "vid", 1.5, 3.0, "pose/synthetic", std::string("train"));
    CHECK(meta.size() == 6);
    auto s = shards::make_sample("id.1", meta, std::string("hi"), {{"pose.npy", "P"}});
    CHECK(s.key == "id_1");
    std::vector<std::string> exts;
    for (const auto& [ext, _] : s.payloads) exts.push_back(ext);
    CHECK(exts == std::vector<std::string>{"json", "pose.npy", "txt"});
    CHECK(s.payloads["json"] ==
          R"({"end_s":3.0,"processor":"pose/synthetic","sample_id":"id.1","split":"train","start_s":1.5,"video_id":"vid"})");
    CHECK(s.payloads["txt"] == "hi");

    auto no_caption = shards::make_sample("x", shards::sample_metadata("x", "v", 0, 1, "p", std::nullopt), std::nullopt,
                                          {{"pose.npy", "P"}});
    CHECK(no_caption.payloads.count("txt") == 0);
    CHECK(shards::sample_metadata("x", "v", 0, 1, "p", std::nullopt).size() == 5);
}

TEST_CASE("257 samples at 100 per shard give 100/100/57") {
    TempDir dir;
    auto index = shards::write_shards(numbered_samples(257), {100, std::int64_t{1} << 30, 0}, dir.path());
    REQUIRE(index.shards.size() == 3);
    CHECK(index.shards[0].count == 100);
    CHECK(index.shards[1].count == 100);
    CHECK(index.shards[2].count == 57);
    CHECK(index.shards[0].path == "shard-00-000000.tar");
    CHECK(index.shards[2].path == "shard-00-000002.tar");
    CHECK(index.total_samples() == 257);
    for (const auto& s : index.shards) CHECK(static_cast<std::int64_t>(fs::file_size(dir.path() / s.path)) == s.bytes);
}

TEST_CASE("entries of one sample are adjacent and ordered") {
    TempDir dir;
    auto s = shards::make_sample("key", shards::sample_metadata("key", "v", 0, 1, "p", std::nullopt), std::string("t"),
                                 {{"pose.npy", "P"}});
    auto index = shards::write_shards({s}, {}, dir.path());
    auto members = tar::parse(signpipe::testing::read_file(dir.path() / index.shards[0].path));
    REQUIRE(members.size() == 3);
    CHECK(members[0].name == "key.json");
    CHECK(members[1].name == "key.pose.npy");
    CHECK(members[2].name == "key.txt");
}

TEST_CASE("byte limit closes shards; oversized samples get their own") {
    TempDir dir;
    auto samples = numbered_samples(10);
    auto one = shards::sample_tar_bytes(samples[0]).size();
    // Room for exactly three samples plus the trailer.
    auto index = shards::write_shards(samples, {1000, static_cast<std::int64_t>(3 * one + 1024), 0}, dir.path());
    CHECK(index.shards.size() == 4);
    CHECK(index.shards[0].count == 3);
    CHECK(index.shards[3].count == 1);
    for (const auto& s : index.shards) CHECK(s.bytes <= static_cast<std::int64_t>(3 * one + 1024));

    TempDir tiny;
    auto small = shards::write_shards(numbered_samples(3), {1000, 10, 2}, tiny.path());
    CHECK(small.shards.size() == 3);
    CHECK(small.shards[0].path == "shard-02-000000.tar");
}

TEST_CASE("duplicate keys are refused") {
    TempDir dir;
    auto samples = numbered_samples(2);
    samples[1].key = samples[0].key;
    CHECK(code_of([&] { shards::write_shards(samples, {}, dir.path()); }) == Errc::DuplicateKey);
}

TEST_CASE("property: random samples survive write and read byte for byte") {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 25; ++round) {
        TempDir dir;
        std::vector<shards::SampleRecord> samples;
        std::size_t n = 1 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) {
            shards::SampleRecord s;
            s.key = "k" + std::to_string(round) + "_" + std::to_string(i);
            std::size_t exts = 1 + rng() % 4;
            const char* names[] = {"json", "pose.npy", "txt", "clip.json"};
            for (std::size_t e = 0; e < exts; ++e) s.payloads[names[e]] = random_bytes(rng, rng() % 3000);
            samples.push_back(std::move(s));
        }
        shards::ShardSpec spec{static_cast<std::int64_t>(1 + rng() % 10), static_cast<std::int64_t>(2048 + rng() % 20000),
                               static_cast<int>(rng() % 3)};
        auto index = shards::write_shards(samples, spec, dir.path());
        CHECK(index.total_samples() == static_cast<std::int64_t>(n));
        for (const auto& s : index.shards) CHECK(s.count <= spec.max_samples);

        std::vector<fs::path> paths;
        std::set<std::string> seen;
        for (const auto& s : index.shards) {
            paths.push_back(dir.path() / s.path);
            for (const auto& rec : shards::read_shards({dir.path() / s.path})) CHECK(seen.insert(rec.key).second);
        }
        CHECK(shards::read_shards(paths) == samples);

        // Identical input writes identical bytes.
        TempDir again;
        shards::write_shards(samples, spec, again.path());
        CHECK(signpipe::testing::snapshot(dir.path()) == signpipe::testing::snapshot(again.path()));
    }
}

TEST_CASE("read_shards edge cases") {
    CHECK(shards::read_shards({}).empty());
    TempDir dir;
    std::string interleaved = tar::member("a.json", "1") + tar::member("b.json", "2") + tar::member("a.txt", "3") + tar::trailer();
    signpipe::testing::write_file(dir / "bad.tar", interleaved);
    CHECK(code_of([&] { shards::read_shards({dir / "bad.tar"}); }) == Errc::MalformedShard);
}

TEST_CASE("verify_shards catches truncation and index edits") {
    TempDir dir;
    auto index = shards::write_shards(numbered_samples(30), {10, std::int64_t{1} << 30, 0}, dir.path());
    shards::write_shard_index(index, dir.path());
    auto ok = shards::verify_shards(dir.path());
    CHECK(ok.ok());
    CHECK(ok.samples == 30);
    CHECK(shards::read_shard_index(dir.path()) == index);

    auto edited = index;
    edited.shards[1].count = 9;
    shards::write_shard_index(edited, dir.path());
    auto bad_count = shards::verify_shards(dir.path());
    REQUIRE_FALSE(bad_count.ok());
    CHECK(bad_count.problems[0].find("shard-00-000001.tar") != std::string::npos);

    shards::write_shard_index(index, dir.path());
    fs::resize_file(dir.path() / "shard-00-000002.tar", 1500);
    auto truncated = shards::verify_shards(dir.path());
    REQUIRE_FALSE(truncated.ok());
    bool named = false;
    for (const auto& p : truncated.problems) named |= p.find("shard-00-000002.tar") != std::string::npos;
    CHECK(named);
}
