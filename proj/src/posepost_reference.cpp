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

#include <algorithm>
#include <limits>

#include "signpipe/error.hpp"
#include "signpipe/posepost.hpp"

namespace signpipe::posepost::reference {

std::vector<std::uint8_t> compute_valid_mask(const LandmarkClip& clip, double visibility_threshold) {
    std::vector<std::uint8_t> mask;
    const auto vis = clip.channel_index(Channel::Visibility);
    for (std::size_t t = 0; t < clip.frames; ++t) {
        for (std::size_t k = 0; k < clip.keypoints; ++k) {
            mask.push_back(!vis || clip.at(t, k, *vis) >= visibility_threshold ? 1 : 0);
        }
    }
    return mask;
}

LandmarkClip unit_bbox_normalize(const LandmarkClip& clip, const NormalizeOptions& options,
                                 std::vector<std::size_t>* zeroed_frames) {
    const auto xi = clip.channel_index(Channel::X);
    const auto yi = clip.channel_index(Channel::Y);
    if (!xi || !yi) fail(Errc::InvalidValue, "landmark clip lacks x/y channels");
    const auto zi = clip.channel_index(Channel::Z);
    const auto mask = reference::compute_valid_mask(clip, options.visibility_threshold);
    const bool per_clip = options.scope == config::NormalizeScope::PerClip;
    const std::size_t units = per_clip ? 1 : clip.frames;
    const std::size_t frames_per_unit = per_clip ? clip.frames : 1;

    LandmarkClip out = clip;
    out.space = Space::UnitBBox;
    if (zeroed_frames) zeroed_frames->clear();

    for (std::size_t u = 0; u < units; ++u) {
        const std::size_t t0 = u * frames_per_unit;
        const std::size_t t1 = t0 + frames_per_unit;
        double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
        double xmax = -xmin, ymax = -xmin;
        std::size_t valid = 0;
        for (std::size_t t = t0; t < t1; ++t) {
            for (std::size_t k = 0; k < clip.keypoints; ++k) {
                if (!mask[t * clip.keypoints + k]) continue;
                xmin = std::min(xmin, clip.at(t, k, *xi));
                xmax = std::max(xmax, clip.at(t, k, *xi));
                ymin = std::min(ymin, clip.at(t, k, *yi));
                ymax = std::max(ymax, clip.at(t, k, *yi));
                ++valid;
            }
        }
        if (valid == 0) {
            if (per_clip) fail(Errc::NoValidPoints, "clip '" + clip.sample_id + "' has no valid points");
            if (zeroed_frames) zeroed_frames->push_back(t0);
        }
        const double w = xmax - xmin;
        const double h = ymax - ymin;
        for (std::size_t t = t0; t < t1; ++t) {
            for (std::size_t k = 0; k < clip.keypoints; ++k) {
                if (!mask[t * clip.keypoints + k]) {
                    for (std::size_t c = 0; c < clip.channel_count(); ++c) out.at(t, k, c) = 0.0;
                    continue;
                }
                out.at(t, k, *xi) = (clip.at(t, k, *xi) - xmin) / std::max(w, options.epsilon);
                out.at(t, k, *yi) = (clip.at(t, k, *yi) - ymin) / std::max(h, options.epsilon);
                if (zi) out.at(t, k, *zi) = std::max(w, h) < options.epsilon ? 0.0 : clip.at(t, k, *zi) / std::max(w, h);
            }
        }
    }
    return out;
}

LandmarkClip mask_invisible(const LandmarkClip& clip, double visibility_threshold) {
    LandmarkClip out = clip;
    const auto vis = clip.channel_index(Channel::Visibility);
    if (!vis) return out;
    for (std::size_t t = 0; t < clip.frames; ++t) {
        for (std::size_t k = 0; k < clip.keypoints; ++k) {
            if (clip.at(t, k, *vis) >= visibility_threshold) continue;
            for (std::size_t c = 0; c < clip.channel_count(); ++c) out.at(t, k, c) = 0.0;
        }
    }
    return out;
}

}  // namespace signpipe::posepost::reference
