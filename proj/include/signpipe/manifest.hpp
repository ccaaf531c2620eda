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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signpipe/canonical_json.hpp"
#include "signpipe/config.hpp"
#include "signpipe/geometry.hpp"
#include "signpipe/hashing.hpp"

namespace signpipe::manifest {

enum class Field { SampleId, VideoId, StartS, EndS, Text, Split, SignerId, BBox };

std::string_view to_string(Field field) noexcept;
std::optional<Field> field_from_string(std::string_view name) noexcept;

/// One captioned, temporally bounded segment of one source video.
/// bbox is in absolute pixels (x0, y0, x1, y1).
struct ManifestRecord {
    std::string sample_id;
    std::string video_id;
    std::optional<double> start_s;
    std::optional<double> end_s;
    std::optional<std::string> text;
    std::optional<std::string> split;
    std::optional<std::string> signer_id;
    std::optional<geometry::Box> bbox;
    std::map<std::string, std::string> extras;

    std::optional<double> duration() const {
        if (start_s && end_s) return *end_s - *start_s;
        return std::nullopt;
    }

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
    std::vector<ManifestRecord> records;  // ingestion order
    std::string source_path;
    std::string adapter_name;
};

struct Reject {
    std::string sample_id;
    std::string stage;
    std::string reason;

    friend bool operator==(const Reject&, const Reject&) = default;
};

// ---- column aliases --------------------------------------------------------

/// Lower-cased alias -> canonical field.
using AliasTable = std::map<std::string, Field>;

struct ColumnTarget {
    std::string header;
    std::optional<Field> field;  // canonical destination
    std::string extras_key;      // destination when field is empty
    bool flagged = false;        // header unusable as a key (empty); kept under a positional name
};

/// Every header lands in a canonical field or in extras. Lookup is case-insensitive.
/// Throws Error(AmbiguousAlias) when two headers resolve to the same field.
std::vector<ColumnTarget> normalize_columns(const std::vector<std::string>& headers, const AliasTable& aliases);

/// Reads {"sample_id": ["SENTENCE_NAME", ...], ...}. A field without listed aliases is
/// matched by its canonical name; listing aliases replaces that, so a How2Sign VIDEO_ID
/// column can sit next to VIDEO_NAME without colliding.
AliasTable alias_table_from_json(const Json& tree);
AliasTable load_alias_table(const std::filesystem::path& path);
/// Shipped table for an adapter, with per-field replacements from params["aliases"].
AliasTable alias_table_for(std::string_view table_name, const Json& params);

std::filesystem::path data_dir();

// ---- text / filtering -----------------------------------------------------

/// NFC, whitespace runs collapsed to one space, trimmed.
std::string normalize_text(std::string_view s);

struct FilterResult {
    Manifest retained;
    std::vector<Reject> rejects;  // stage "manifest"
};

/// Reasons, checked in this order: MissingText, MissingTiming, TooShort, TooLong.
/// Retained records carry normalized text.
FilterResult filter_segments(const Manifest& manifest, const config::FilterConfig& rules);

// ---- hashing and persistence ----------------------------------------------

std::string canonical_body(const Manifest& manifest);
Digest manifest_hash(const Manifest& manifest);

std::string format_bbox(const geometry::Box& box);
/// Accepts "x0,y0,x1,y1", "[x0, y0, x1, y1]" or whitespace-separated values.
std::optional<geometry::Box> parse_bbox(std::string_view text);
/// Decimal seconds or clock time "[H:]MM:SS[.fff]".
std::optional<double> parse_seconds(std::string_view text);

inline constexpr std::string_view kManifestHeader =
    "sample_id,video_id,start_s,end_s,text,split,signer_id,bbox,extras_json";
inline constexpr std::string_view kRejectsHeader = "sample_id,stage,reason";

std::string to_csv(const Manifest& manifest);
void write_manifest_csv(const Manifest& manifest, const std::filesystem::path& path);
std::string rejects_to_csv(const std::vector<Reject>& rejects, bool with_header = true);
std::vector<Reject> read_rejects_csv(const std::filesystem::path& path);

}  // namespace signpipe::manifest
