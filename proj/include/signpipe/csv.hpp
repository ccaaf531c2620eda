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

namespace signpipe::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// RFC 4180 style: fields may be double-quoted, quotes doubled inside, quoted fields
/// may span lines. A trailing '\r' before '\n' is dropped. Throws
/// Error(SchemaError) on an unterminated quote. Blank lines are skipped.
Table parse(std::string_view text, char delimiter = ',');

/// Quotes a field only when it contains the delimiter, a quote, CR or LF.
std::string format_field(std::string_view field, char delimiter = ',');
std::string format_row(const Row& row, char delimiter = ',');

}  // namespace signpipe::csv
