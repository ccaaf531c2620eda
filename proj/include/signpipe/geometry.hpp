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

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace signpipe::geometry {

/// Axis-aligned box in pixels. Invariant: x0 <= x1, y0 <= y1, all finite.
struct Box {
    double x0 = 0;
    double y0 = 0;
    double x1 = 0;
    double y1 = 0;

    double width() const noexcept { return x1 - x0; }
    double height() const noexcept { return y1 - y0; }
    bool valid() const noexcept;
    bool contains(const Box& other) const noexcept;

    friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
    int frame_index = 0;
    Box box;
    double score = 1.0;
};

struct CropPlan {
    Box crop;  // integer-aligned
    int output_width = 0;
    int output_height = 0;

    friend bool operator==(const CropPlan&, const CropPlan&) = default;
};

struct Size {
    int width = 0;
    int height = 0;
};

enum class SkipReason { MultiPerson, NoDetection };
std::string_view to_string(SkipReason reason) noexcept;

struct Skip {
    SkipReason reason;
};

using RegionResult = std::variant<Box, Skip>;

inline constexpr double kDefaultMinScore = 0.25;

/// Throws Error(EmptyInput) on an empty list.
Box union_boxes(std::span<const Box> boxes);

Box clamp_box(const Box& box, int frame_w, int frame_h);

Box pad_box(const Box& box, double pad_fraction, int frame_w, int frame_h);

/// Detections under min_score are dropped first. Any sampled frame left with two or
/// more detections skips the clip as MultiPerson; no surviving detection at all
/// skips it as NoDetection; otherwise the union of all surviving boxes.
RegionResult select_signer_region(const std::map<int, std::vector<Detection>>& detections,
                                  double min_score = kDefaultMinScore);

/// Grows the box about its center until width/height == target_aspect, then shifts it
/// back inside the frame. Throws Error(Unsatisfiable) when the grown box cannot fit.
Box expand_to_aspect(const Box& box, double target_aspect, int frame_w, int frame_h);

/// Rounds outward to whole pixels and clamps. Throws Error(DegenerateBox) on zero area.
CropPlan make_crop_plan(const Box& box, std::optional<Size> resize, int frame_w, int frame_h);

}  // namespace signpipe::geometry
