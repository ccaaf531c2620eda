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

#include <string>

#include <json.hpp>

namespace signpipe {

using Json = nlohmann::json;

/// Shortest decimal that parses back to the same double. Integral values keep a
/// trailing ".0" so reals never collide with integers in canonical output.
std::string format_real(double value);

/// Deterministic JSON rendering: object keys in byte-wise lexicographic order at every
/// level, no insignificant whitespace, reals via format_real, UTF-8 passed through
/// unescaped except for '"', '\\' and control characters.
std::string canonical_dump(const Json& value);

}  // namespace signpipe
