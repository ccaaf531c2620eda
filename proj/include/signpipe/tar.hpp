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
#include <string_view>
#include <vector>

namespace signpipe::tar {

inline constexpr std::size_t kBlock = 512;

/// One regular-file member with fixed metadata: mode 0644, uid/gid 0, mtime 0, empty
/// owner names. Names longer than 100 bytes get a preceding pax "path" record.
std::string member(std::string_view name, std::string_view bytes);

/// Two zero blocks.
std::string trailer();

struct Member {
    std::string name;
    std::string bytes;
};

/// Parses regular files (pax headers are applied, directories skipped). Throws
/// Error(MalformedShard) on checksum errors or truncation.
std::vector<Member> parse(std::string_view archive);

}  // namespace signpipe::tar
