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

#include "signpipe/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "signpipe/error.hpp"

namespace signpipe::geometry {

bool Box::valid() const noexcept {
    return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1) && x0 <= x1 &&
           y0 <= y1;
}

bool Box::contains(const Box& o) const noexcept {
    return x0 <= o.x0 && y0 <= o.y0 && x1 >= o.x1 && y1 >= o.y1;
}

std::string_view to_string(SkipReason reason) noexcept {
    return reason == SkipReason::MultiPerson ? "MultiPerson" : "NoDetection";
}

Box union_boxes(std::span<const Box> boxes) {
    if (boxes.empty()) fail(Errc::EmptyInput, "union_boxes: empty box list");
    Box out = boxes.front();
    for (const auto& b : boxes.subspan(1)) {
        out.x0 = std::min(out.x0, b.x0);
        out.y0 = std::min(out.y0, b.y0);
        out.x1 = std::max(out.x1, b.x1);
        out.y1 = std::max(out.y1, b.y1);
    }
    return out;
}

Box clamp_box(const Box& b, int frame_w, int frame_h) {
    const double w = frame_w;
    const double h = frame_h;
    Box out{std::clamp(b.x0, 0.0, w), std::clamp(b.y0, 0.0, h), std::clamp(b.x1, 0.0, w),
            std::clamp(b.y1, 0.0, h)};
    return out;
}

Box pad_box(const Box& box, double pad_fraction, int frame_w, int frame_h) {
    const double dx = pad_fraction * box.width();
    const double dy = pad_fraction * box.height();
    return clamp_box({box.x0 - dx, box.y0 - dy, box.x1 + dx, box.y1 + dy}, frame_w, frame_h);
}

RegionResult select_signer_region(const std::map<int, std::vector<Detection>>& detections, double min_score) {
    std::vector<Box> kept;
    for (const auto& [frame, dets] : detections) {
        std::size_t in_frame = 0;
        for (const auto& d : dets) {
            if (d.score < min_score) continue;
            ++in_frame;
            kept.push_back(d.box);
        }
        if (in_frame >= 2) return Skip{SkipReason::MultiPerson};
    }
    if (kept.empty()) return Skip{SkipReason::NoDetection};
    return union_boxes(kept);
}

namespace {

// Slides [lo, hi] inside [0, limit] without changing its length.
void shift_into(double& lo, double& hi, double limit) {
    if (lo < 0) {
        hi -= lo;
        lo = 0;
    }
    if (hi > limit) {
        lo -= hi - limit;
        hi = limit;
    }
}

}  // namespace

Box expand_to_aspect(const Box& box, double target_aspect, int frame_w, int frame_h) {
    if (!(target_aspect > 0)) fail(Errc::InvalidValue, "target_aspect must be > 0");
    const double w = box.width();
    const double h = box.height();
    if (h <= 0 || w <= 0) fail(Errc::Unsatisfiable, "cannot aspect-correct a zero-extent box");
    const double aspect = w / h;
    if (aspect == target_aspect) return box;

    Box out = box;
    if (aspect < target_aspect) {
        const double new_w = h * target_aspect;
        if (new_w > frame_w) fail(Errc::Unsatisfiable, "aspect-corrected width exceeds frame");
        const double cx = (box.x0 + box.x1) / 2;
        out.x0 = cx - new_w / 2;
        out.x1 = cx + new_w / 2;
        shift_into(out.x0, out.x1, frame_w);
    } else {
        const double new_h = w / target_aspect;
        if (new_h > frame_h) fail(Errc::Unsatisfiable, "aspect-corrected height exceeds frame");
        const double cy = (box.y0 + box.y1) / 2;
        out.y0 = cy - new_h / 2;
        out.y1 = cy + new_h / 2;
        shift_into(out.y0, out.y1, frame_h);
    }
    return out;
}

CropPlan make_crop_plan(const Box& box, std::optional<Size> resize, int frame_w, int frame_h) {
    Box crop{std::floor(box.x0), std::floor(box.y0), std::ceil(box.x1), std::ceil(box.y1)};
    crop = clamp_box(crop, frame_w, frame_h);
    if (crop.width() <= 0 || crop.height() <= 0) {
        fail(Errc::DegenerateBox, "crop box has zero area after rounding");
    }
    CropPlan plan;
    plan.crop = crop;
    if (resize) {
        if (resize->width <= 0 || resize->height <= 0) fail(Errc::InvalidValue, "resize dims must be > 0");
        plan.output_width = resize->width;
        plan.output_height = resize->height;
    } else {
        plan.output_width = static_cast<int>(crop.width());
        plan.output_height = static_cast<int>(crop.height());
    }
    return plan;
}

}  // namespace signpipe::geometry
