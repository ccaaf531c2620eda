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

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signpipe/components.hpp"
#include "signpipe/config.hpp"
#include "signpipe/hashing.hpp"
#include "signpipe/manifest.hpp"
#include "signpipe/shards.hpp"

namespace signpipe::pipeline {

enum class Stage { Manifest, Process, Postprocess, Export };
inline constexpr Stage kStages[] = {Stage::Manifest, Stage::Process, Stage::Postprocess, Stage::Export};

std::string_view to_string(Stage stage) noexcept;
std::optional<Stage> stage_from_string(std::string_view name) noexcept;

/// Config paths each stage hash covers.
std::vector<std::string> stage_sections(Stage stage);

/// Directory under run_dir holding a completed stage's outputs.
std::string_view stage_dir_name(Stage stage) noexcept;

/// Characters outside [A-Za-z0-9._-] become '_'; empty names become "job".
std::string sanitize_name(std::string_view name);

/// sanitized job_name + "-" + first 12 hex digits of the SHA-256 of the identity tree.
std::string run_id(const config::JobConfig& config);

/// SHA-256(stage name bytes || config_hash(stage sections) || upstream).
Digest stage_hash(Stage stage, const config::JobConfig& config, const Digest& upstream);

/// Item i goes to list i mod W, order preserved.
std::vector<std::vector<std::size_t>> partition_work(std::size_t count, int workers);

template <class T>
std::vector<std::vector<T>> partition_work(const std::vector<T>& items, int workers) {
    std::vector<std::vector<T>> out(static_cast<std::size_t>(workers < 1 ? 1 : workers));
    for (std::size_t i = 0; i < items.size(); ++i) out[i % out.size()].push_back(items[i]);
    return out;
}

struct Counts {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t rejected = 0;

    bool balanced() const noexcept { return in == out + rejected; }
    friend bool operator==(const Counts&, const Counts&) = default;
};

struct StageMarker {
    Stage stage = Stage::Manifest;
    std::string input_hash;    // hex
    std::string completed_at;  // UTC, microsecond resolution
    Counts counts;
    std::string run_id;        // run that executed the stage

    friend bool operator==(const StageMarker&, const StageMarker&) = default;
};

Json to_json(const StageMarker& marker);
StageMarker marker_from_json(const Json& tree);
std::filesystem::path marker_path(const std::filesystem::path& run_dir, Stage stage);
std::optional<StageMarker> read_marker(const std::filesystem::path& path);

/// Appends rows to a rejects CSV; safe to call from several workers.
class RejectSink {
public:
    explicit RejectSink(std::filesystem::path path);
    /// Throws Error(WriteFailure).
    void record(const manifest::Reject& reject);
    std::size_t count() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::size_t count_ = 0;
};

/// Appends one row to run_dir/rejects.csv, writing the header first if the file is new.
void record_reject(const std::filesystem::path& run_dir, const std::string& sample_id, const std::string& stage,
                   const std::string& reason);

struct StageReport {
    Stage stage = Stage::Manifest;
    std::string input_hash;
    Counts counts;
    bool executed = false;
    std::string source_run;  // run whose outputs were reused, when not executed
};

struct RunReport {
    std::string run_id;
    std::string job_name;
    std::filesystem::path run_dir;
    std::vector<StageReport> stages;
    std::vector<manifest::Reject> rejects;
    shards::ShardIndex shards;
    bool ok = false;
    std::string failed_stage;
    std::string error;
};

/// Machine-readable report: sorted keys, no timestamps, no absolute paths.
Json to_json(const RunReport& report);

/// Per-run state; stage_records fill in as stages finish.
struct RunContext {
    config::JobConfig config;
    std::string run_id;
    std::filesystem::path run_dir;
    std::optional<manifest::Manifest> manifest;
    std::vector<StageMarker> stage_records;
    std::vector<manifest::Reject> rejects;
};

struct ExecuteOptions {
    /// Called right after a stage's marker is written (tests use it to simulate a crash).
    std::function<void(Stage)> after_marker;
};

/// Runs manifest -> process -> postprocess -> export. report.json is written even on
/// failure; failures are rethrown as StageFailure.
RunReport execute_job(const config::JobConfig& config, const Registries& registries,
                      const ExecuteOptions& options = {});

struct ExperimentResult {
    std::vector<RunReport> reports;  // one per started job
    std::vector<std::size_t> failed_jobs;
    bool ok() const { return failed_jobs.empty(); }
};

/// Jobs run in order. Without continue_on_error the first failure is rethrown as a
/// StageFailure naming the job index.
ExperimentResult execute_experiment(const config::ExperimentConfig& experiment, const Registries& registries,
                                    const ExecuteOptions& options = {});

}  // namespace signpipe::pipeline
