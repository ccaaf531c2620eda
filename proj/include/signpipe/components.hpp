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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signpipe/adapters.hpp"
#include "signpipe/config.hpp"
#include "signpipe/extractor.hpp"
#include "signpipe/mediaio.hpp"
#include "signpipe/registry.hpp"
#include "signpipe/shards.hpp"

namespace signpipe::pipeline {

/// One sample as it moves between stages. The payload file lives in the stage directory.
struct Item {
    std::size_t ordinal = 0;  // position in the retained manifest
    std::string sample_id;
    std::string video_id;
    double start_s = 0;
    double end_s = 0;
    std::optional<std::string> text;
    std::optional<std::string> split;
    std::string processor;    // e.g. "pose/synthetic"
    std::string payload;      // file name inside the stage directory
    std::string payload_ext;  // export extension: "pose.npy", "clip.json", "mp4"
    Json pose;                // pose layout: channels, space, fps, backend, flattened, zeroed_frames

    friend bool operator==(const Item&, const Item&) = default;
};

Json to_json(const Item& item);
Item item_from_json(const Json& tree);

/// Either a finished item or the reason the sample was dropped.
struct Outcome {
    std::optional<Item> item;
    std::string reject_reason;
};

class ProcessWorker {
public:
    virtual ~ProcessWorker() = default;
    /// Per-sample failures come back as rejects; anything thrown aborts the stage.
    virtual Outcome process(const manifest::ManifestRecord& record, std::size_t ordinal,
                            const std::filesystem::path& out_dir) = 0;
};

class Processor {
public:
    virtual ~Processor() = default;
    /// One worker per parallel slot; each owns its own backend.
    virtual std::unique_ptr<ProcessWorker> make_worker(int worker_id) const = 0;
};

class Postprocessor {
public:
    virtual ~Postprocessor() = default;
    virtual Outcome apply(const Item& item, const std::filesystem::path& in_dir,
                          const std::filesystem::path& out_dir) const = 0;
};

class Exporter {
public:
    virtual ~Exporter() = default;
    /// Writes this worker's items into its own shard sequence under out_dir.
    virtual shards::ShardIndex write(std::span<const Item> items, const std::filesystem::path& in_dir,
                                     const std::filesystem::path& out_dir, int worker_id) const = 0;
};

class Detector {
public:
    virtual ~Detector() = default;
    virtual std::vector<geometry::Detection> detect(const mediaio::DecodedFrame& frame, int position) const = 0;
};

struct Registries;

using DatasetFactory = std::function<std::unique_ptr<manifest::DatasetAdapter>()>;
using ProcessorFactory = std::function<std::unique_ptr<Processor>(const config::JobConfig&, const Registries&)>;
using PostprocessorFactory = std::function<std::unique_ptr<Postprocessor>(const config::JobConfig&)>;
using ExporterFactory = std::function<std::unique_ptr<Exporter>(const config::JobConfig&)>;
using MediaFactory = std::function<std::unique_ptr<mediaio::MediaBackend>(const config::MediaConfig&)>;
using DetectorFactory = std::function<std::unique_ptr<Detector>(const config::DetectorConfig&)>;

struct Registries {
    registry::NameRegistry<DatasetFactory> datasets{registry::Kind::Dataset};
    registry::NameRegistry<ProcessorFactory> processors{registry::Kind::Processor};
    registry::NameRegistry<PostprocessorFactory> postprocessors{registry::Kind::Postprocessor};
    registry::NameRegistry<ExporterFactory> exporters{registry::Kind::Exporter};
    registry::NameRegistry<extractor::BackendFactory> extractors{registry::Kind::Extractor};
    registry::NameRegistry<MediaFactory> media{registry::Kind::MediaIO};
    registry::NameRegistry<DetectorFactory> detectors{registry::Kind::Detector};

    std::vector<std::string> list(registry::Kind kind) const;
};

/// The static builtin set.
Registries builtin_registries();

/// Adds the config's external-command extractor under its backend_name, if it has one.
void register_config_backends(Registries& registries, const config::JobConfig& config);

/// Resolves every name the job refers to. Throws UnknownNameError on the first miss.
void check_components(const Registries& registries, const config::JobConfig& config);

/// Processor and postprocessor names chosen for a job.
std::string processor_name(const config::JobConfig& config);
std::string postprocessor_name(const config::JobConfig& config);
std::string exporter_name(const config::JobConfig& config);

/// Directory holding the source videos.
std::filesystem::path video_dir(const config::JobConfig& config);

}  // namespace signpipe::pipeline
