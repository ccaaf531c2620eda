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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signpipe/canonical_json.hpp"
#include "signpipe/hashing.hpp"

namespace signpipe::config {

enum class Mode { Pose, Video };
enum class NormalizeScope { PerClip, PerFrame };
enum class OutputFormat { WebDataset };

std::string_view to_string(Mode mode) noexcept;
std::string_view to_string(NormalizeScope scope) noexcept;

inline constexpr std::string_view kDefaultProbeCommand =
    "ffprobe -v error -select_streams v:0 -show_entries stream=width,height,r_frame_rate:format=duration "
    "-of json {input}";
inline constexpr std::string_view kDefaultRenderCommand =
    "ffmpeg -y -loglevel error -ss {start} -to {end} -i {input} "
    "-vf crop={w}:{h}:{x}:{y},scale={out_w}:{out_h} -an {output}";

struct DatasetConfig {
    std::string adapter_name;
    std::string source_path;
    Json params = Json::object();
    std::optional<std::string> video_dir;  // defaults to the directory holding source_path
    std::string video_ext = ".mp4";
};

struct DetectorConfig {
    std::string backend_name = "scripted";
    Json params = Json::object();
    int sample_stride = 1;
    double rate_hz = 1.0;
    double min_score = 0.25;
};

struct ExtractorConfig {
    std::string backend_name;
    std::optional<std::string> command;
    Json params = Json::object();
    int expected_keypoints = 0;
    int channels = 4;
};

struct ResizeConfig {
    int width = 0;
    int height = 0;
};

struct CropConfig {
    double pad_fraction = 0.1;
    std::optional<double> target_aspect;
    std::optional<ResizeConfig> resize;
};

struct MediaConfig {
    std::string backend_name = "auto";
    std::string probe_command = std::string(kDefaultProbeCommand);
    std::string render_command = std::string(kDefaultRenderCommand);
    std::string output_ext = "mp4";
};

struct ProcessingConfig {
    Mode mode = Mode::Pose;
    double frame_rate_hz = 25.0;
    std::optional<DetectorConfig> detector;
    std::optional<ExtractorConfig> extractor;
    std::optional<CropConfig> crop;
    MediaConfig media;
};

struct NormalizeConfig {
    NormalizeScope scope = NormalizeScope::PerClip;
    double visibility_threshold = 0.5;
    double epsilon = 1e-6;
};

struct PostprocessConfig {
    bool enabled = true;
    std::optional<std::string> preset_name;
    NormalizeConfig normalize;
    bool flatten = false;
    bool mask_invisible = false;
    bool keep_depth = true;
};

struct FilterConfig {
    bool require_text = true;
    bool require_timing = true;
    double min_duration_s = 0.5;
    double max_duration_s = 60.0;
};

struct OutputConfig {
    OutputFormat format = OutputFormat::WebDataset;
    std::int64_t max_samples_per_shard = 1000;
    std::int64_t max_bytes_per_shard = std::int64_t{1} << 30;
};

struct RuntimeConfig {
    int workers = 1;
    std::uint64_t seed = 0;
    bool resume = true;
    std::string output_root = "runs";
};

/// A validated job declaration. Immutable once built; share freely across workers.
struct JobConfig {
    std::string job_name;
    DatasetConfig dataset;
    ProcessingConfig processing;
    PostprocessConfig postprocess;
    FilterConfig filter;
    OutputConfig output;
    RuntimeConfig runtime;
};

struct ExperimentJob {
    Json base;       // raw (un-defaulted) config tree
    Json overrides;  // dotted path -> scalar or subtree
    std::string label;
};

struct ExperimentConfig {
    std::string experiment_name;
    std::vector<ExperimentJob> jobs;
    bool continue_on_error = false;
};

// ---- trees ---------------------------------------------------------------

/// Parse a YAML 1.2 file into a JSON tree. Quoted scalars stay strings; plain
/// scalars are typed as null, bool, integer, real or string.
Json load_yaml_tree(const std::filesystem::path& path);
Json parse_yaml_text(std::string_view text);
/// Parses one override value as it would appear in YAML ("4", "abc", "[1, 2]").
Json parse_scalar(std::string_view text);

/// Throws UnknownField if `dotted` does not address a schema field.
void check_path(std::string_view dotted);

Json merge_overrides(Json base, const Json& overrides);

// ---- typed configs -------------------------------------------------------

JobConfig job_from_tree(const Json& tree);
Json to_tree(const JobConfig& config);

JobConfig load_config(const std::filesystem::path& path);
JobConfig load_config(const std::filesystem::path& path, const Json& overrides);

ExperimentConfig load_experiment(const std::filesystem::path& path);
ExperimentConfig experiment_from_tree(const Json& tree, const std::filesystem::path& base_dir);
/// Merges overrides into every job and validates; either all jobs or an error.
std::vector<JobConfig> resolve_jobs(const ExperimentConfig& experiment);

// ---- identity ------------------------------------------------------------

std::string canonical_serialize(const JobConfig& config);
Digest config_hash(const JobConfig& config);
Digest config_hash(const JobConfig& config, std::string_view section);
/// Hash over several subtrees at once, rendered as {"<path>": subtree, ...}.
Digest config_hash(const JobConfig& config, const std::vector<std::string>& sections);

/// The tree identifying a run: the whole config minus execution controls
/// (runtime.resume, runtime.output_root) that never change outputs.
Json identity_tree(const JobConfig& config);

}  // namespace signpipe::config
