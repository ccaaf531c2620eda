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
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "signpipe/config.hpp"
#include "signpipe/geometry.hpp"
#include "signpipe/manifest.hpp"
#include "signpipe/posepost.hpp"

namespace signpipe::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

std::string env_or(const char* name, const std::string& fallback);
std::filesystem::path fixtures_dir();
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

struct CorpusOptions {
    std::size_t segments = 5;
    double segment_s = 2.0;           // clip length
    std::size_t segments_per_video = 5;
    std::size_t multi_person_every = 0;  // every n-th video shows two people (0: never)
    std::size_t empty_every = 0;         // every n-th video shows nobody (0: never)
};

/// Writes <dir>/segments.csv (How2Sign-style columns) and <dir>/videos/<id>.synth.json.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const CorpusOptions& options);

/// A validated pose job over a corpus written by write_corpus, using the synthetic extractor.
Json pose_job_tree(const std::filesystem::path& corpus_dir, const std::filesystem::path& output_root, int workers);
config::JobConfig pose_job(const std::filesystem::path& corpus_dir, const std::filesystem::path& output_root,
                           int workers);

// ---- random generators for property tests ----------------------------------------

geometry::Box random_box(std::mt19937_64& rng, double w, double h);
posepost::LandmarkClip random_clip(std::mt19937_64& rng, std::size_t max_frames, std::size_t max_keypoints);

/// Records with random text made of letters, composed and decomposed accents and assorted
/// Unicode whitespace; timing is sometimes absent, sometimes tiny or huge.
manifest::ManifestRecord random_record(std::mt19937_64& rng, std::size_t index);
config::FilterConfig random_rules(std::mt19937_64& rng);
/// Independent re-statement of the filter rules; nullopt when the record must be kept.
std::optional<std::string> brute_force_reason(const manifest::ManifestRecord& record, const config::FilterConfig& rules);

/// Random detections over `frames` sampled frames; scores straddle the default threshold.
std::map<int, std::vector<geometry::Detection>> random_detections(std::mt19937_64& rng, int frames, double w, double h);

/// Every regular file under dir (relative path -> bytes), for byte-identity checks.
std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& dir);

}  // namespace signpipe::testing
