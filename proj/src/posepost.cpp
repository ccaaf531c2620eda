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

#include "signpipe/posepost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "signpipe/error.hpp"
#include "signpipe/manifest.hpp"

namespace signpipe::posepost {

namespace {

// Below this many points the OpenMP fork costs more than the loop.
constexpr std::ptrdiff_t kParallelThreshold = 4096;

struct Extent {
    double xmin = std::numeric_limits<double>::infinity();
    double ymin = std::numeric_limits<double>::infinity();
    double xmax = -std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();
    std::size_t valid = 0;
};

struct Layout {
    std::size_t x, y, c;
    std::optional<std::size_t> z, vis;
};

Layout layout_of(const LandmarkClip& clip) {
    Layout l{};
    l.x = *clip.channel_index(Channel::X);
    l.y = *clip.channel_index(Channel::Y);
    l.z = clip.channel_index(Channel::Z);
    l.vis = clip.channel_index(Channel::Visibility);
    l.c = clip.channel_count();
    return l;
}

void require_xy(const LandmarkClip& clip) {
    if (!clip.channel_index(Channel::X) || !clip.channel_index(Channel::Y)) {
        fail(Errc::InvalidValue, "landmark clip lacks x/y channels");
    }
}

// Writes one normalized point; `extent` must hold at least one valid point.
inline void normalize_point(const double* src, double* dst, bool valid, const Extent& e, const Layout& l,
                            double eps) {
    if (!valid) {
        std::fill(dst, dst + l.c, 0.0);
        return;
    }
    std::copy(src, src + l.c, dst);
    const double w = e.xmax - e.xmin;
    const double h = e.ymax - e.ymin;
    dst[l.x] = (src[l.x] - e.xmin) / std::max(w, eps);
    dst[l.y] = (src[l.y] - e.ymin) / std::max(h, eps);
    // a point-sized box would scale z by 1/eps on every pass; it maps to 0 like a flat axis
    if (l.z) dst[*l.z] = std::max(w, h) < eps ? 0.0 : src[*l.z] / std::max(w, h);
}

Extent extent_of(const LandmarkClip& clip, const std::vector<std::uint8_t>& mask, std::size_t begin,
                 std::size_t end, const Layout& l) {
    double xmin = std::numeric_limits<double>::infinity();
    double ymin = xmin;
    double xmax = -xmin;
    double ymax = -xmin;
    std::size_t valid = 0;
    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(end);
#pragma omp parallel for reduction(min : xmin, ymin) reduction(max : xmax, ymax) reduction(+ : valid) \
    if (e - b >= kParallelThreshold)
    for (std::ptrdiff_t p = b; p < e; ++p) {
        if (!mask[static_cast<std::size_t>(p)]) continue;
        const double* pt = clip.data.data() + static_cast<std::size_t>(p) * l.c;
        xmin = std::min(xmin, pt[l.x]);
        xmax = std::max(xmax, pt[l.x]);
        ymin = std::min(ymin, pt[l.y]);
        ymax = std::max(ymax, pt[l.y]);
        ++valid;
    }
    return Extent{xmin, ymin, xmax, ymax, valid};
}

}  // namespace

std::string_view to_string(Channel c) noexcept {
    switch (c) {
        case Channel::X: return "x";
        case Channel::Y: return "y";
        case Channel::Z: return "z";
        case Channel::Visibility: return "visibility";
    }
    return "";
}

std::string_view to_string(Space s) noexcept {
    switch (s) {
        case Space::Pixel: return "pixel";
        case Space::FrameNormalized: return "frame_normalized";
        case Space::UnitBBox: return "unit_bbox";
    }
    return "";
}

std::optional<Channel> channel_from_string(std::string_view s) noexcept {
    for (auto c : {Channel::X, Channel::Y, Channel::Z, Channel::Visibility}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

std::optional<Space> space_from_string(std::string_view s) noexcept {
    for (auto sp : {Space::Pixel, Space::FrameNormalized, Space::UnitBBox}) {
        if (to_string(sp) == s) return sp;
    }
    return std::nullopt;
}

std::vector<Channel> channels_for_count(int count) {
    switch (count) {
        case 2: return {Channel::X, Channel::Y};
        case 3: return {Channel::X, Channel::Y, Channel::Visibility};
        case 4: return {Channel::X, Channel::Y, Channel::Z, Channel::Visibility};
        default: fail(Errc::InvalidValue, "channel count must be 2, 3 or 4, got " + std::to_string(count));
    }
}

std::optional<std::size_t> LandmarkClip::channel_index(Channel ch) const noexcept {
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (channels[i] == ch) return i;
    }
    return std::nullopt;
}

void LandmarkClip::validate() const {
    if (frames < 1 || keypoints < 1) fail(Errc::InvalidValue, "landmark clip needs T >= 1 and K >= 1");
    if (channels.empty()) fail(Errc::InvalidValue, "landmark clip has no channels");
    std::set<Channel> seen(channels.begin(), channels.end());
    if (seen.size() != channels.size()) fail(Errc::InvalidValue, "duplicate channel semantics");
    if (data.size() != frames * keypoints * channels.size()) fail(Errc::InvalidValue, "data size != T*K*C");
    if (!(fps > 0)) fail(Errc::InvalidValue, "fps must be > 0");
    const auto vis = channel_index(Channel::Visibility);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) fail(Errc::InvalidValue, "non-finite landmark value");
        if (vis && i % channels.size() == *vis && (data[i] < 0 || data[i] > 1)) {
            fail(Errc::InvalidValue, "visibility outside [0,1]");
        }
    }
}

KeypointPreset preset_from_json(const Json& tree) {
    if (!tree.is_object()) fail(Errc::InvalidValue, "preset must be a JSON object");
    for (const char* key : {"name", "backend", "indices"}) {
        if (!tree.contains(key)) fail(Errc::InvalidValue, std::string("preset missing '") + key + "'");
    }
    KeypointPreset p;
    p.name = tree.at("name").get<std::string>();
    p.backend_name = tree.at("backend").get<std::string>();
    std::set<std::size_t> seen;
    for (const auto& v : tree.at("indices")) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            fail(Errc::InvalidValue, "preset '" + p.name + "': indices must be non-negative integers");
        }
        auto idx = v.get<std::size_t>();
        if (!seen.insert(idx).second) {
            fail(Errc::InvalidValue, "preset '" + p.name + "': duplicate index " + std::to_string(idx));
        }
        p.indices.push_back(idx);
    }
    if (p.indices.empty()) fail(Errc::InvalidValue, "preset '" + p.name + "' has no indices");
    return p;
}

KeypointPreset load_preset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::InvalidValue, "cannot read preset " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return preset_from_json(Json::parse(ss.str()));
    } catch (const Json::exception& e) {
        fail(Errc::InvalidValue, path.string() + ": " + e.what());
    }
}

KeypointPreset resolve_preset(const std::string& name_or_path) {
    const bool is_path = name_or_path.find('/') != std::string::npos ||
                         (name_or_path.size() > 5 && name_or_path.ends_with(".json"));
    if (is_path) return load_preset(name_or_path);
    return load_preset(manifest::data_dir() / "presets" / (name_or_path + ".json"));
}

LandmarkClip reduce_keypoints(const LandmarkClip& clip, const KeypointPreset& preset) {
    if (preset.backend_name != clip.backend_name) {
        fail(Errc::BackendMismatch, "preset '" + preset.name + "' targets backend '" + preset.backend_name +
                                        "', clip comes from '" + clip.backend_name + "'");
    }
    for (auto idx : preset.indices) {
        if (idx >= clip.keypoints) {
            fail(Errc::IndexOutOfRange, "preset '" + preset.name + "' index " + std::to_string(idx) +
                                            " >= keypoint count " + std::to_string(clip.keypoints));
        }
    }
    LandmarkClip out = clip;
    out.keypoints = preset.indices.size();
    out.data.assign(clip.frames * out.keypoints * clip.channel_count(), 0.0);
    const std::size_t c = clip.channel_count();
    for (std::size_t t = 0; t < clip.frames; ++t) {
        for (std::size_t k = 0; k < out.keypoints; ++k) {
            const double* src = clip.data.data() + clip.offset(t, preset.indices[k], 0);
            std::copy(src, src + c, out.data.data() + out.offset(t, k, 0));
        }
    }
    return out;
}

std::vector<std::uint8_t> compute_valid_mask(const LandmarkClip& clip, double visibility_threshold) {
    const std::size_t points = clip.frames * clip.keypoints;
    std::vector<std::uint8_t> mask(points, 1);
    const auto vis = clip.channel_index(Channel::Visibility);
    if (!vis) return mask;
    const std::size_t c = clip.channel_count();
    const auto n = static_cast<std::ptrdiff_t>(points);
#pragma omp parallel for if (n >= kParallelThreshold)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        const auto i = static_cast<std::size_t>(p);
        mask[i] = clip.data[i * c + *vis] >= visibility_threshold ? 1 : 0;
    }
    return mask;
}

LandmarkClip unit_bbox_normalize(const LandmarkClip& clip, const NormalizeOptions& options,
                                 std::vector<std::size_t>* zeroed_frames) {
    require_xy(clip);
    const Layout l = layout_of(clip);
    const auto mask = compute_valid_mask(clip, options.visibility_threshold);
    LandmarkClip out = clip;
    out.space = Space::UnitBBox;
    if (zeroed_frames) zeroed_frames->clear();

    if (options.scope == config::NormalizeScope::PerClip) {
        const std::size_t points = clip.frames * clip.keypoints;
        const Extent e = extent_of(clip, mask, 0, points, l);
        if (e.valid == 0) fail(Errc::NoValidPoints, "clip '" + clip.sample_id + "' has no valid points");
        const auto n = static_cast<std::ptrdiff_t>(points);
#pragma omp parallel for if (n >= kParallelThreshold)
        for (std::ptrdiff_t p = 0; p < n; ++p) {
            const auto i = static_cast<std::size_t>(p);
            normalize_point(clip.data.data() + i * l.c, out.data.data() + i * l.c, mask[i], e, l, options.epsilon);
        }
        return out;
    }

    std::vector<std::uint8_t> empty(clip.frames, 0);
    const auto frames = static_cast<std::ptrdiff_t>(clip.frames);
    const std::size_t k = clip.keypoints;
#pragma omp parallel for if (frames * static_cast<std::ptrdiff_t>(k) >= kParallelThreshold)
    for (std::ptrdiff_t tt = 0; tt < frames; ++tt) {
        const auto t = static_cast<std::size_t>(tt);
        Extent e;
        for (std::size_t p = t * k; p < (t + 1) * k; ++p) {
            if (!mask[p]) continue;
            const double* pt = clip.data.data() + p * l.c;
            e.xmin = std::min(e.xmin, pt[l.x]);
            e.xmax = std::max(e.xmax, pt[l.x]);
            e.ymin = std::min(e.ymin, pt[l.y]);
            e.ymax = std::max(e.ymax, pt[l.y]);
            ++e.valid;
        }
        if (e.valid == 0) {
            empty[t] = 1;
            std::fill(out.data.begin() + static_cast<std::ptrdiff_t>(t * k * l.c),
                      out.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * k * l.c), 0.0);
            continue;
        }
        for (std::size_t p = t * k; p < (t + 1) * k; ++p) {
            normalize_point(clip.data.data() + p * l.c, out.data.data() + p * l.c, mask[p], e, l, options.epsilon);
        }
    }
    if (zeroed_frames) {
        for (std::size_t t = 0; t < clip.frames; ++t) {
            if (empty[t]) zeroed_frames->push_back(t);
        }
    }
    return out;
}

LandmarkClip mask_invisible(const LandmarkClip& clip, double visibility_threshold) {
    const auto vis = clip.channel_index(Channel::Visibility);
    if (!vis) return clip;
    LandmarkClip out = clip;
    const std::size_t c = clip.channel_count();
    const auto n = static_cast<std::ptrdiff_t>(clip.frames * clip.keypoints);
#pragma omp parallel for if (n >= kParallelThreshold)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        double* pt = out.data.data() + static_cast<std::size_t>(p) * c;
        if (pt[*vis] < visibility_threshold) std::fill(pt, pt + c, 0.0);
    }
    return out;
}

FlatArray flatten(const LandmarkClip& clip) {
    // Row-major (t, k, c) storage already is keypoint-major within a frame.
    return FlatArray{clip.frames, clip.keypoints * clip.channel_count(), clip.data};
}

std::vector<double> unflatten(const FlatArray& flat, std::size_t keypoints, std::size_t channels) {
    if (keypoints * channels != flat.cols) fail(Errc::InvalidValue, "unflatten: K*C does not match column count");
    return flat.data;
}

LandmarkClip drop_depth(const LandmarkClip& clip) {
    const auto z = clip.channel_index(Channel::Z);
    if (!z) fail(Errc::NoDepthChannel, "clip '" + clip.sample_id + "' has no z channel");
    LandmarkClip out = clip;
    out.channels.erase(out.channels.begin() + static_cast<std::ptrdiff_t>(*z));
    out.data.clear();
    out.data.reserve(clip.frames * clip.keypoints * out.channels.size());
    const std::size_t c = clip.channel_count();
    for (std::size_t i = 0; i < clip.data.size(); ++i) {
        if (i % c != *z) out.data.push_back(clip.data[i]);
    }
    return out;
}

}  // namespace signpipe::posepost
