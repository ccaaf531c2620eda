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

#include "signpipe/shards.hpp"

#include <cstdio>
#include <sstream>

#include "signpipe/error.hpp"
#include "signpipe/tar.hpp"

namespace signpipe::shards {

namespace fs = std::filesystem;

std::string sanitize_key(std::string_view sample_id) {
    std::string key(sample_id);
    for (char& ch : key) {
        const bool ok = (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_' ||
                        ch == '-';
        if (!ok) ch = '_';
    }
    return key;
}

Json sample_metadata(const std::string& sample_id, const std::string& video_id, double start_s, double end_s,
                     const std::string& processor, const std::optional<std::string>& split) {
    Json m = {{"sample_id", sample_id},
              {"video_id", video_id},
              {"start_s", start_s},
              {"end_s", end_s},
              {"processor", processor}};
    if (split && !split->empty()) m["split"] = *split;
    return m;
}

SampleRecord make_sample(const std::string& sample_id, const Json& metadata, const std::optional<std::string>& caption,
                         std::map<std::string, std::string> payloads) {
    SampleRecord s{sanitize_key(sample_id), std::move(payloads)};
    s.payloads["json"] = canonical_dump(metadata);
    if (caption && !caption->empty()) s.payloads["txt"] = *caption;
    return s;
}

std::string sample_tar_bytes(const SampleRecord& sample) {
    std::string out;
    for (const auto& [ext, bytes] : sample.payloads) out += tar::member(sample.key + "." + ext, bytes);
    return out;
}

std::string shard_name(int worker_id, int seq) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "shard-%02d-%06d.tar", worker_id, seq);
    return buf;
}

std::int64_t ShardIndex::total_samples() const {
    std::int64_t n = 0;
    for (const auto& s : shards) n += s.count;
    return n;
}

Json to_json(const ShardIndex& index) {
    Json list = Json::array();
    for (const auto& s : index.shards) list.push_back({{"path", s.path}, {"count", s.count}, {"bytes", s.bytes}});
    return {{"shards", list}};
}

ShardIndex shard_index_from_json(const Json& tree) {
    if (!tree.is_object() || !tree.contains("shards") || !tree.at("shards").is_array()) {
        fail(Errc::MalformedShard, "shard index must be {\"shards\": [...]}");
    }
    ShardIndex index;
    for (const auto& s : tree.at("shards")) {
        if (!s.is_object() || !s.contains("path") || !s.at("path").is_string() || !s.contains("count") ||
            !s.at("count").is_number_integer() || !s.contains("bytes") || !s.at("bytes").is_number_integer()) {
            fail(Errc::MalformedShard, "shard index entry needs path, count, bytes");
        }
        index.shards.push_back(
            {s.at("path").get<std::string>(), s.at("count").get<std::int64_t>(), s.at("bytes").get<std::int64_t>()});
    }
    return index;
}

void write_shard_index(const ShardIndex& index, const fs::path& dir) {
    std::ofstream out(dir / kIndexFile, std::ios::binary | std::ios::trunc);
    out << canonical_dump(to_json(index)) << '\n';
    if (!out) fail(Errc::WriteFailure, "cannot write " + (dir / kIndexFile).string());
}

ShardIndex read_shard_index(const fs::path& dir) {
    std::ifstream in(dir / kIndexFile, std::ios::binary);
    if (!in) fail(Errc::MalformedShard, "missing " + (dir / kIndexFile).string());
    try {
        return shard_index_from_json(Json::parse(in));
    } catch (const Json::exception& e) {
        fail(Errc::MalformedShard, std::string("unparseable shard index: ") + e.what());
    }
}

ShardWriter::ShardWriter(ShardSpec spec, fs::path out_dir) : spec_(spec), out_dir_(std::move(out_dir)) {
    if (spec_.max_samples <= 0 || spec_.max_bytes <= 0) fail(Errc::InvalidValue, "shard limits must be positive");
    if (spec_.worker_id < 0) fail(Errc::InvalidValue, "worker_id must be non-negative");
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec) fail(Errc::WriteFailure, "cannot create " + out_dir_.string() + ": " + ec.message());
}

ShardWriter::~ShardWriter() {
    if (open_) current_.close();
}

void ShardWriter::close_current() {
    if (!open_) return;
    const std::string end = tar::trailer();
    current_.write(end.data(), static_cast<std::streamsize>(end.size()));
    current_.close();
    if (!current_) fail(Errc::WriteFailure, "cannot finish " + index_.shards.back().path);
    index_.shards.back().bytes += static_cast<std::int64_t>(end.size());
    open_ = false;
}

void ShardWriter::add(const SampleRecord& sample) {
    if (!keys_.insert(sample.key).second) fail(Errc::DuplicateKey, "duplicate sample key '" + sample.key + "'");
    const std::string bytes = sample_tar_bytes(sample);
    const auto size = static_cast<std::int64_t>(bytes.size());
    const auto trailer = static_cast<std::int64_t>(2 * tar::kBlock);
    if (open_) {
        const auto& cur = index_.shards.back();
        if (cur.count + 1 > spec_.max_samples || cur.bytes + size + trailer > spec_.max_bytes) close_current();
    }
    if (!open_) {
        const std::string name = shard_name(spec_.worker_id, seq_++);
        current_.open(out_dir_ / name, std::ios::binary | std::ios::trunc);
        if (!current_) fail(Errc::WriteFailure, "cannot create " + (out_dir_ / name).string());
        index_.shards.push_back({name, 0, 0});
        open_ = true;
    }
    current_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!current_) fail(Errc::WriteFailure, "write failed on " + index_.shards.back().path);
    index_.shards.back().count += 1;
    index_.shards.back().bytes += size;
}

ShardIndex ShardWriter::finish() {
    close_current();
    return index_;
}

ShardIndex write_shards(const std::vector<SampleRecord>& samples, const ShardSpec& spec, const fs::path& out_dir) {
    ShardWriter writer(spec, out_dir);
    for (const auto& s : samples) writer.add(s);
    return writer.finish();
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::MalformedShard, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Appends the shard's samples to `out`, enforcing adjacency against `seen`.
std::size_t group_members(const fs::path& path, std::vector<SampleRecord>& out, std::set<std::string>& seen) {
    const std::string archive = read_file(path);
    std::vector<tar::Member> members;
    try {
        members = tar::parse(archive);
    } catch (const Error& e) {
        fail(Errc::MalformedShard, path.filename().string() + ": " + e.what());
    }
    std::size_t added = 0;
    for (auto& m : members) {
        const auto dot = m.name.find('.');
        if (dot == std::string::npos || dot == 0) {
            fail(Errc::MalformedShard, path.filename().string() + ": member '" + m.name + "' has no key.extension form");
        }
        std::string key = m.name.substr(0, dot);
        std::string ext = m.name.substr(dot + 1);
        const bool continues = added > 0 && out.back().key == key;
        if (!continues) {
            if (!seen.insert(key).second) {
                fail(Errc::MalformedShard, path.filename().string() + ": key '" + key + "' is not contiguous");
            }
            out.push_back({key, {}});
            ++added;
        }
        if (!out.back().payloads.emplace(std::move(ext), std::move(m.bytes)).second) {
            fail(Errc::MalformedShard, path.filename().string() + ": duplicate member '" + m.name + "'");
        }
    }
    return added;
}

}  // namespace

std::vector<SampleRecord> read_shards(const std::vector<fs::path>& paths) {
    std::vector<SampleRecord> out;
    std::set<std::string> seen;
    for (const auto& p : paths) group_members(p, out, seen);
    return out;
}

VerifyResult verify_shards(const fs::path& dir) {
    VerifyResult result;
    ShardIndex index;
    try {
        index = read_shard_index(dir);
    } catch (const Error& e) {
        result.problems.push_back(std::string(kIndexFile) + ": " + e.what());
        return result;
    }
    std::set<std::string> seen;
    for (const auto& s : index.shards) {
        const fs::path path = dir / s.path;
        std::error_code ec;
        const auto size = fs::file_size(path, ec);
        if (ec) {
            result.problems.push_back(s.path + ": missing");
            continue;
        }
        if (static_cast<std::int64_t>(size) != s.bytes) {
            result.problems.push_back(s.path + ": size " + std::to_string(size) + " != index bytes " +
                                      std::to_string(s.bytes));
        }
        std::vector<SampleRecord> samples;
        try {
            group_members(path, samples, seen);
        } catch (const Error& e) {
            result.problems.push_back(std::string(e.what()));
            continue;
        }
        const auto count = static_cast<std::int64_t>(samples.size());
        result.samples += count;
        if (count != s.count) {
            result.problems.push_back(s.path + ": count " + std::to_string(count) + " != index count " +
                                      std::to_string(s.count));
        }
    }
    return result;
}

}  // namespace signpipe::shards
