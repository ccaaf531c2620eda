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

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "signpipe/manifest.hpp"

namespace signpipe::manifest {

struct IngestResult {
    Manifest manifest;
    std::vector<Reject> rejects;  // malformed rows, stage "manifest"
    std::size_t rows_read = 0;    // manifest.records.size() + rejects.size()
};

/// Source-specific ingestion terminating in the canonical manifest schema.
class DatasetAdapter {
public:
    virtual ~DatasetAdapter() = default;
    virtual IngestResult ingest(const std::filesystem::path& source, const Json& params) const = 0;
};

/// Delimiter-separated text. params: "delimiter" ("," "\t" or "tab"), "aliases".
std::unique_ptr<DatasetAdapter> make_delimited_adapter(std::string name, char default_delimiter,
                                                       std::string alias_table);
/// JSON list of segment objects (or {"segments": [...]}); keys go through the alias table.
std::unique_ptr<DatasetAdapter> make_transcript_json_adapter();
/// Reads the canonical manifest.csv written by the pipeline.
std::unique_ptr<DatasetAdapter> make_manifest_csv_adapter();

IngestResult read_manifest_csv(const std::filesystem::path& path);

/// how2sign_csv, manifest_csv, openasl_tsv, transcript_json.
std::vector<std::string> builtin_adapter_names();
/// Throws Error(UnknownAdapter).
std::unique_ptr<DatasetAdapter> make_builtin_adapter(std::string_view name);
IngestResult ingest(std::string_view adapter_name, const std::filesystem::path& source, const Json& params);

}  // namespace signpipe::manifest
