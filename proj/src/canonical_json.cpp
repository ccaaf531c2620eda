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

#include "signpipe/canonical_json.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace signpipe {

std::string format_real(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("non-finite real in canonical output");
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    std::string out(buf, end);
    if (out.find_first_of(".eE") == std::string::npos) out += ".0";
    return out;
}

namespace {

void dump_string(const std::string& s, std::string& out) {
    static constexpr char kHex[] = "0123456789abcdef";
    out.push_back('"');
    for (unsigned char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            default:
                if (ch < 0x20) {
                    out += "\\u00";
                    out.push_back(kHex[ch >> 4]);
                    out.push_back(kHex[ch & 0xF]);
                } else {
                    out.push_back(static_cast<char>(ch));
                }
        }
    }
    out.push_back('"');
}

void dump(const Json& v, std::string& out) {
    switch (v.type()) {
        case Json::value_t::null: out += "null"; break;
        case Json::value_t::boolean: out += v.get<bool>() ? "true" : "false"; break;
        case Json::value_t::number_integer: out += std::to_string(v.get<std::int64_t>()); break;
        case Json::value_t::number_unsigned: out += std::to_string(v.get<std::uint64_t>()); break;
        case Json::value_t::number_float: out += format_real(v.get<double>()); break;
        case Json::value_t::string: dump_string(v.get_ref<const std::string&>(), out); break;
        case Json::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& item : v) {
                if (!first) out.push_back(',');
                first = false;
                dump(item, out);
            }
            out.push_back(']');
            break;
        }
        case Json::value_t::object: {
            // nlohmann's object_t is a std::map, so iteration is already key-sorted
            out.push_back('{');
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                dump_string(it.key(), out);
                out.push_back(':');
                dump(it.value(), out);
            }
            out.push_back('}');
            break;
        }
        case Json::value_t::binary:
        case Json::value_t::discarded:
            throw std::invalid_argument("unsupported JSON value in canonical output");
    }
}

}  // namespace

std::string canonical_dump(const Json& value) {
    std::string out;
    dump(value, out);
    return out;
}

}  // namespace signpipe
