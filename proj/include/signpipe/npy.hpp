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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace signpipe::npy {

enum class ElementKind { F4, F8 };

/// NPY v1.0: magic, little-endian header length, header dict padded so the data starts
/// on a 64-byte boundary, then row-major little-endian values.
std::string encode_array(std::span<const double> data, const std::vector<std::size_t>& shape,
                         ElementKind kind = ElementKind::F4);

struct Array {
    std::vector<std::size_t> shape;
    ElementKind kind = ElementKind::F4;
    std::vector<double> data;
};

/// Accepts what encode_array writes ('<f4' or '<f8', C order). Throws Error(InvalidValue).
Array decode_array(std::string_view bytes);

}  // namespace signpipe::npy
