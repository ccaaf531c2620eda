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

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "signpipe/error.hpp"

namespace signpipe::registry {

enum class Kind { Dataset, Processor, Postprocessor, Exporter, Extractor, MediaIO, Detector };

inline constexpr Kind kAllKinds[] = {Kind::Dataset,   Kind::Processor, Kind::Postprocessor, Kind::Exporter,
                                     Kind::Extractor, Kind::MediaIO,   Kind::Detector};

std::string_view to_string(Kind kind) noexcept;

std::size_t edit_distance(std::string_view a, std::string_view b);

/// Up to `limit` names closest to `query` by edit distance, ties broken lexicographically.
std::vector<std::string> closest_names(std::string_view query, const std::vector<std::string>& names,
                                       std::size_t limit = 3);

/// Name -> factory table for one component kind. Lookups are exact and case-sensitive.
/// Filled once at startup, then only read.
template <class Factory>
class NameRegistry {
public:
    explicit NameRegistry(Kind kind) : kind_(kind) {}

    void add(std::string name, Factory factory) {
        if (name.empty()) fail(Errc::InvalidValue, std::string(to_string(kind_)) + " name must be non-empty");
        auto [it, inserted] = entries_.emplace(std::move(name), std::move(factory));
        if (!inserted) {
            fail(Errc::DuplicateName, std::string(to_string(kind_)) + " '" + it->first + "' already registered");
        }
    }

    const Factory& resolve(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw UnknownNameError(std::string(to_string(kind_)), name, closest_names(name, list()));
        }
        return it->second;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    std::vector<std::string> list() const {
        std::vector<std::string> names;
        names.reserve(entries_.size());
        for (const auto& [name, _] : entries_) names.push_back(name);
        return names;  // std::map keeps them sorted
    }

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
    std::map<std::string, Factory> entries_;
};

}  // namespace signpipe::registry
