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

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "signpipe/canonical_json.hpp"

namespace signpipe::shards {

/// Characters outside [A-Za-z0-9_-] become '_'. Dots are replaced too because WebDataset
/// splits a member name into key and extension at the first dot.
std::string sanitize_key(std::string_view sample_id);

/// One exportable sample. payloads maps extension ("json", "pose.npy", "txt", ...) to bytes;
/// std::map keeps the extensions in lexicographic order.
struct SampleRecord {
    std::string key;
    std::map<std::string, std::string> payloads;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Metadata fields: sample_id, video_id, start_s, end_s, processor, and split when known.
Json sample_metadata(const std::string& sample_id, const std::string& video_id, double start_s, double end_s,
                     const std::string& processor, const std::optional<std::string>& split);

/// Adds the "json" payload (canonical metadata) and a "txt" payload when a caption exists.
SampleRecord make_sample(const std::string& sample_id, const Json& metadata, const std::optional<std::string>& caption,
                         std::map<std::string, std::string> payloads);

/// Bytes the sample occupies inside a shard.
std::string sample_tar_bytes(const SampleRecord& sample);

struct ShardSpec {
    std::int64_t max_samples = 1000;
    std::int64_t max_bytes = std::int64_t{1} << 30;
    int worker_id = 0;
};

std::string shard_name(int worker_id, int seq);

struct ShardInfo {
    std::string path;  // relative to the shard directory
    std::int64_t count = 0;
    std::int64_t bytes = 0;

    friend bool operator==(const ShardInfo&, const ShardInfo&) = default;
};

struct ShardIndex {
    std::vector<ShardInfo> shards;

    std::int64_t total_samples() const;
    friend bool operator==(const ShardIndex&, const ShardIndex&) = default;
};

inline constexpr std::string_view kIndexFile = "shards.json";

Json to_json(const ShardIndex& index);
ShardIndex shard_index_from_json(const Json& tree);
void write_shard_index(const ShardIndex& index, const std::filesystem::path& dir);
ShardIndex read_shard_index(const std::filesystem::path& dir);

/// Streams samples into shard-{worker:02}-{seq:06}.tar files. A shard is closed before a
/// sample that would push it past max_samples or max_bytes (tar trailer included); a
/// sample larger than max_bytes on its own still gets a shard.
class ShardWriter {
public:
    ShardWriter(ShardSpec spec, std::filesystem::path out_dir);
    ~ShardWriter();
    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;

    /// Throws DuplicateKey or WriteFailure.
    void add(const SampleRecord& sample);
    ShardIndex finish();

private:
    void close_current();

    ShardSpec spec_;
    std::filesystem::path out_dir_;
    std::set<std::string> keys_;
    ShardIndex index_;
    std::ofstream current_;
    bool open_ = false;
    int seq_ = 0;
};

ShardIndex write_shards(const std::vector<SampleRecord>& samples, const ShardSpec& spec,
                        const std::filesystem::path& out_dir);

/// Groups adjacent same-key members. Throws Error(MalformedShard) when a key reappears
/// after another key or the archive is damaged.
std::vector<SampleRecord> read_shards(const std::vector<std::filesystem::path>& paths);

struct VerifyResult {
    std::vector<std::string> problems;  // one line per discrepancy, naming the shard
    std::int64_t samples = 0;
    bool ok() const { return problems.empty(); }
};

/// Re-reads every shard listed in dir/shards.json and checks adjacency, key uniqueness
/// and agreement with the recorded counts and sizes.
VerifyResult verify_shards(const std::filesystem::path& dir);

}  // namespace signpipe::shards
