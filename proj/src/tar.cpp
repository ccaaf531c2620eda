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

#include "signpipe/tar.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>

#include "signpipe/error.hpp"

namespace signpipe::tar {

namespace {

void put_octal(char* field, std::size_t width, std::uint64_t value) {
    // width-1 zero-padded digits, then NUL
    std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

void put_string(char* field, std::size_t width, std::string_view s) {
    std::memcpy(field, s.data(), std::min(width, s.size()));
}

std::uint64_t checksum(const char* block) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) {
        sum += (i >= 148 && i < 156) ? static_cast<unsigned char>(' ') : static_cast<unsigned char>(block[i]);
    }
    return sum;
}

std::string header(std::string_view name, std::size_t size, char type) {
    std::string block(kBlock, '\0');
    char* h = block.data();
    put_string(h, 100, name);
    put_octal(h + 100, 8, 0644);
    put_octal(h + 108, 8, 0);
    put_octal(h + 116, 8, 0);
    put_octal(h + 124, 12, size);
    put_octal(h + 136, 12, 0);
    h[156] = type;
    std::memcpy(h + 257, "ustar", 6);
    std::memcpy(h + 263, "00", 2);
    std::snprintf(h + 148, 8, "%06llo", static_cast<unsigned long long>(checksum(h)));
    h[155] = ' ';
    return block;
}

void pad(std::string& out) { out.append((kBlock - out.size() % kBlock) % kBlock, '\0'); }

std::string pax_record(std::string_view key, std::string_view value) {
    // "<len> key=value\n" where len counts itself
    const std::size_t body = key.size() + value.size() + 3;
    std::size_t len = body + 1;
    while (std::to_string(len).size() + body != len) ++len;
    return std::to_string(len) + " " + std::string(key) + "=" + std::string(value) + "\n";
}

std::uint64_t read_octal(const char* field, std::size_t width) {
    std::uint64_t v = 0;
    std::size_t i = 0;
    while (i < width && field[i] == ' ') ++i;
    for (; i < width && field[i] >= '0' && field[i] <= '7'; ++i) v = v * 8 + static_cast<std::uint64_t>(field[i] - '0');
    for (; i < width; ++i) {
        if (field[i] != '\0' && field[i] != ' ') fail(Errc::MalformedShard, "bad octal field in tar header");
    }
    return v;
}

std::string read_string(const char* field, std::size_t width) {
    return std::string(field, strnlen(field, width));
}

}  // namespace

std::string member(std::string_view name, std::string_view bytes) {
    std::string out;
    if (name.size() > 100) {
        const std::string rec = pax_record("path", name);
        out += header("././@PaxHeader", rec.size(), 'x');
        out += rec;
        pad(out);
    }
    out += header(name.substr(0, 100), bytes.size(), '0');
    out.append(bytes);
    pad(out);
    return out;
}

std::string trailer() { return std::string(2 * kBlock, '\0'); }

std::vector<Member> parse(std::string_view archive) {
    std::vector<Member> members;
    std::size_t pos = 0;
    std::string pending_path;
    while (true) {
        if (pos + kBlock > archive.size()) fail(Errc::MalformedShard, "truncated tar: missing end-of-archive blocks");
        const char* h = archive.data() + pos;
        if (std::all_of(h, h + kBlock, [](char c) { return c == '\0'; })) break;
        if (read_octal(h + 148, 8) != checksum(h)) {
            fail(Errc::MalformedShard, "tar header checksum mismatch at offset " + std::to_string(pos));
        }
        const std::uint64_t size = read_octal(h + 124, 12);
        const char type = h[156];
        pos += kBlock;
        if (pos + size > archive.size()) fail(Errc::MalformedShard, "truncated tar member");
        const std::string_view data = archive.substr(pos, size);
        pos += (size + kBlock - 1) / kBlock * kBlock;
        if (pos > archive.size()) fail(Errc::MalformedShard, "truncated tar member padding");

        if (type == 'x') {
            std::size_t p = 0;
            while (p < data.size()) {
                const auto space = data.find(' ', p);
                if (space == std::string_view::npos) fail(Errc::MalformedShard, "bad pax record");
                const std::size_t len = std::stoul(std::string(data.substr(p, space - p)));
                if (len == 0 || p + len > data.size()) fail(Errc::MalformedShard, "bad pax record length");
                const std::string_view rec = data.substr(space + 1, p + len - space - 2);
                const auto eq = rec.find('=');
                if (eq != std::string_view::npos && rec.substr(0, eq) == "path") pending_path = rec.substr(eq + 1);
                p += len;
            }
            continue;
        }
        if (type != '0' && type != '\0') {
            pending_path.clear();
            continue;
        }
        std::string name = pending_path.empty() ? read_string(h, 100) : pending_path;
        if (pending_path.empty()) {
            const std::string prefix = read_string(h + 345, 155);
            if (!prefix.empty()) name = prefix + "/" + name;
        }
        pending_path.clear();
        members.push_back({std::move(name), std::string(data)});
    }
    return members;
}

}  // namespace signpipe::tar
