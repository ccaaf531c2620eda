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

#include "signpipe/registry.hpp"

#include <numeric>

namespace signpipe::registry {

std::string_view to_string(Kind kind) noexcept {
    switch (kind) {
        case Kind::Dataset: return "dataset";
        case Kind::Processor: return "processor";
        case Kind::Postprocessor: return "postprocessor";
        case Kind::Exporter: return "exporter";
        case Kind::Extractor: return "extractor";
        case Kind::MediaIO: return "mediaio";
        case Kind::Detector: return "detector";
    }
    return "";
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<std::string> closest_names(std::string_view query, const std::vector<std::string>& names,
                                       std::size_t limit) {
    std::vector<std::pair<std::size_t, std::string>> scored;
    scored.reserve(names.size());
    for (const auto& n : names) scored.emplace_back(edit_distance(query, n), n);
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < limit; ++i) out.push_back(scored[i].second);
    return out;
}

}  // namespace signpipe::registry
