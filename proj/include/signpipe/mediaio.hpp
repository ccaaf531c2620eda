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
#include <memory>
#include <string>
#include <vector>

#include "signpipe/canonical_json.hpp"
#include "signpipe/config.hpp"
#include "signpipe/geometry.hpp"

namespace signpipe::mediaio {

struct MediaInfo {
    double duration_s = 0;
    double fps = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const MediaInfo&, const MediaInfo&) = default;
};

/// Throws Error(BadMetadata) unless every field is positive and finite.
void validate(const MediaInfo& info);

/// Persons visible during [start_s, end_s).
struct SceneSpan {
    double start_s = 0;
    double end_s = 0;
    std::vector<geometry::Box> boxes;
    std::vector<double> scores;  // parallel to boxes; 1.0 when omitted
};

/// Test stand-in for a video file (extension .synth.json).
struct SyntheticMedia {
    MediaInfo info;
    std::vector<SceneSpan> scene;
};

inline constexpr std::string_view kSyntheticExt = ".synth.json";
inline constexpr std::string_view kClipDescriptorExt = "clip.json";

SyntheticMedia synthetic_media_from_json(const Json& tree);
Json to_json(const SyntheticMedia& media);

/// t_i = start_s + i / rate_hz for i = 0 .. floor((end_s - start_s) * rate_hz), keeping
/// only t_i < end_s. Throws Error(InvalidRange) unless start_s < end_s and rate_hz > 0.
std::vector<double> sample_times(double start_s, double end_s, double rate_hz);

/// Nearest source frame for a timestamp: round(t * fps), clamped to the last frame.
std::int64_t nearest_frame(const MediaInfo& info, double t);

struct DecodedFrame {
    double time_s = 0;
    std::int64_t frame_index = 0;
    int width = 0;
    int height = 0;
    std::string path;                              // file_ref target
    std::vector<geometry::Detection> detections;  // scripted people (synthetic media only)
};

/// The recorded parameters of one render; a synthetic render writes exactly this.
struct RenderDescriptor {
    std::string input;
    double start_s = 0;
    double end_s = 0;
    geometry::CropPlan plan;

    friend bool operator==(const RenderDescriptor&, const RenderDescriptor&) = default;
};

Json to_json(const RenderDescriptor& d);
RenderDescriptor render_descriptor_from_json(const Json& tree);

class MediaBackend {
public:
    virtual ~MediaBackend() = default;
    /// Throws Unreadable or BadMetadata.
    virtual MediaInfo probe(const std::filesystem::path& path) const = 0;
    /// One frame per timestamp, nearest-frame. Throws DecodeFailure outside [0, duration].
    virtual std::vector<DecodedFrame> decode_frames(const std::filesystem::path& path,
                                                    const std::vector<double>& times) const = 0;
    /// Throws InvalidRange or CommandFailure.
    virtual void render_clip(const std::filesystem::path& path, double start_s, double end_s,
                             const geometry::CropPlan& plan, const std::filesystem::path& out_path) const = 0;
    /// Extension of render outputs, without the leading dot.
    virtual std::string output_ext() const = 0;
};

std::unique_ptr<MediaBackend> make_synthetic_media();
/// probe_command must print ffprobe-style JSON; render_command is run per clip.
std::unique_ptr<MediaBackend> make_external_media(const config::MediaConfig& config);

bool is_synthetic_path(const std::filesystem::path& path);

/// Tokens substituted into the render command template.
std::map<std::string, std::string> render_tokens(const std::filesystem::path& input, double start_s, double end_s,
                                                 const geometry::CropPlan& plan,
                                                 const std::filesystem::path& output);

}  // namespace signpipe::mediaio
