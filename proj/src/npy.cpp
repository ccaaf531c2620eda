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

#include "signpipe/npy.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "signpipe/error.hpp"

namespace signpipe::npy {

static_assert(std::endian::native == std::endian::little, "NPY writer assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string shape_tuple(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    if (shape.size() == 1) s += ",";
    return s + ")";
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

}  // namespace

std::string encode_array(std::span<const double> data, const std::vector<std::size_t>& shape, ElementKind kind) {
    if (element_count(shape) != data.size()) fail(Errc::InvalidValue, "npy: shape does not match data length");
    std::string header = std::string("{'descr': '") + (kind == ElementKind::F4 ? "<f4" : "<f8") +
                         "', 'fortran_order': False, 'shape': " + shape_tuple(shape) + ", }";
    // magic(6) + version(2) + length(2) + header + '\n' is a multiple of 64
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::string out(kMagic, 6);
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(header.size() & 0xff));
    out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
    out += header;

    const std::size_t width = kind == ElementKind::F4 ? 4 : 8;
    const std::size_t base = out.size();
    out.resize(base + data.size() * width);
    char* dst = out.data() + base;
    if (kind == ElementKind::F4) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const float f = static_cast<float>(data[i]);
            std::memcpy(dst + i * 4, &f, 4);
        }
    } else {
        std::memcpy(dst, data.data(), data.size() * 8);
    }
    return out;
}

Array decode_array(std::string_view bytes) {
    if (bytes.size() < 10 || bytes.substr(0, 6) != std::string_view(kMagic, 6)) {
        fail(Errc::InvalidValue, "npy: bad magic");
    }
    if (bytes[6] != '\x01') fail(Errc::InvalidValue, "npy: only version 1.0 is supported");
    const std::size_t hlen = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    if (bytes.size() < 10 + hlen) fail(Errc::InvalidValue, "npy: truncated header");
    const std::string_view header = bytes.substr(10, hlen);

    Array a;
    if (header.find("'descr': '<f4'") != std::string_view::npos) {
        a.kind = ElementKind::F4;
    } else if (header.find("'descr': '<f8'") != std::string_view::npos) {
        a.kind = ElementKind::F8;
    } else {
        fail(Errc::InvalidValue, "npy: unsupported descr");
    }
    if (header.find("'fortran_order': False") == std::string_view::npos) {
        fail(Errc::InvalidValue, "npy: only C order is supported");
    }
    const auto key = header.find("'shape': (");
    if (key == std::string_view::npos) fail(Errc::InvalidValue, "npy: missing shape");
    const auto open = key + 10;
    const auto close = header.find(')', open);
    if (close == std::string_view::npos) fail(Errc::InvalidValue, "npy: bad shape");
    std::size_t value = 0;
    bool in_number = false;
    for (char ch : header.substr(open, close - open)) {
        if (ch >= '0' && ch <= '9') {
            value = value * 10 + static_cast<std::size_t>(ch - '0');
            in_number = true;
        } else if (ch == ',' || ch == ' ') {
            if (in_number) a.shape.push_back(value);
            value = 0;
            in_number = false;
        } else {
            fail(Errc::InvalidValue, "npy: bad shape");
        }
    }
    if (in_number) a.shape.push_back(value);

    const std::size_t n = element_count(a.shape);
    const std::size_t width = a.kind == ElementKind::F4 ? 4 : 8;
    const std::string_view body = bytes.substr(10 + hlen);
    if (body.size() != n * width) fail(Errc::InvalidValue, "npy: data length does not match shape");
    a.data.resize(n);
    if (a.kind == ElementKind::F4) {
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, body.data() + i * 4, 4);
            a.data[i] = f;
        }
    } else {
        std::memcpy(a.data.data(), body.data(), n * 8);
    }
    return a;
}

}  // namespace signpipe::npy
