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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signpipe/canonical_json.hpp"
#include "signpipe/config.hpp"

namespace signpipe::posepost {

enum class Channel { X, Y, Z, Visibility };
enum class Space { Pixel, FrameNormalized, UnitBBox };

std::string_view to_string(Channel c) noexcept;
std::string_view to_string(Space s) noexcept;
std::optional<Channel> channel_from_string(std::string_view s) noexcept;
std::optional<Space> space_from_string(std::string_view s) noexcept;

/// Channel layout implied by a bare channel count: 2 -> (x,y), 3 -> (x,y,visibility),
/// 4 -> (x,y,z,visibility).
std::vector<Channel> channels_for_count(int count);

/// Dense (frames x keypoints x channels) array, row-major. Missing points are coords 0
/// with visibility 0, never NaN.
struct LandmarkClip {
    std::size_t frames = 0;
    std::size_t keypoints = 0;
    std::vector<Channel> channels;
    std::vector<double> data;
    Space space = Space::FrameNormalized;
    std::string backend_name;
    double fps = 25.0;
    std::string sample_id;

    LandmarkClip() = default;
    LandmarkClip(std::size_t t, std::size_t k, std::vector<Channel> ch)
        : frames(t), keypoints(k), channels(std::move(ch)), data(t * k * channels.size(), 0.0) {}

    std::size_t channel_count() const noexcept { return channels.size(); }
    std::size_t offset(std::size_t t, std::size_t k, std::size_t c) const noexcept {
        return (t * keypoints + k) * channels.size() + c;
    }
    double& at(std::size_t t, std::size_t k, std::size_t c) { return data[offset(t, k, c)]; }
    double at(std::size_t t, std::size_t k, std::size_t c) const { return data[offset(t, k, c)]; }
    std::optional<std::size_t> channel_index(Channel ch) const noexcept;

    /// Throws Error(InvalidValue) describing the first violated invariant.
    void validate() const;

    friend bool operator==(const LandmarkClip&, const LandmarkClip&) = default;
};

struct KeypointPreset {
    std::string name;
    std::string backend_name;
    std::vector<std::size_t> indices;
};

/// JSON {name, backend, indices}; indices must be non-negative and duplicate-free.
KeypointPreset preset_from_json(const Json& tree);
KeypointPreset load_preset(const std::filesystem::path& path);
/// A bare name resolves to <data dir>/presets/<name>.json; anything with a '/' or a
/// .json suffix is taken as a path.
KeypointPreset resolve_preset(const std::string& name_or_path);

struct NormalizeOptions {
    config::NormalizeScope scope = config::NormalizeScope::PerClip;
    double visibility_threshold = 0.5;
    double epsilon = 1e-6;
};

/// Row-major 2-D array produced by flatten().
struct FlatArray {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    friend bool operator==(const FlatArray&, const FlatArray&) = default;
};

LandmarkClip reduce_keypoints(const LandmarkClip& clip, const KeypointPreset& preset);

/// mask[t*K + k] = no visibility channel, or visibility >= threshold.
std::vector<std::uint8_t> compute_valid_mask(const LandmarkClip& clip, double visibility_threshold);

/// Maps the bounding box of valid points onto [0,1] per axis, per clip or per frame.
/// z is divided by the larger planar extent, or set to 0 when that extent is below epsilon. Invalid points become coords 0, visibility 0.
/// per_clip without any valid point throws Error(NoValidPoints); per_frame zeroes such
/// frames and lists them in `zeroed_frames`.
LandmarkClip unit_bbox_normalize(const LandmarkClip& clip, const NormalizeOptions& options,
                                 std::vector<std::size_t>* zeroed_frames = nullptr);

LandmarkClip mask_invisible(const LandmarkClip& clip, double visibility_threshold);

/// (t, k, c) -> row t, column k*C + c.
FlatArray flatten(const LandmarkClip& clip);
std::vector<double> unflatten(const FlatArray& flat, std::size_t keypoints, std::size_t channels);

/// Throws Error(NoDepthChannel) when the clip has no z.
LandmarkClip drop_depth(const LandmarkClip& clip);

/// Serial implementations of the data-parallel kernels above. Same contracts, same
/// arithmetic; kept as the oracle the OpenMP versions are tested against.
namespace reference {

std::vector<std::uint8_t> compute_valid_mask(const LandmarkClip& clip, double visibility_threshold);
LandmarkClip unit_bbox_normalize(const LandmarkClip& clip, const NormalizeOptions& options,
                                 std::vector<std::size_t>* zeroed_frames = nullptr);
LandmarkClip mask_invisible(const LandmarkClip& clip, double visibility_threshold);

}  // namespace reference

}  // namespace signpipe::posepost
