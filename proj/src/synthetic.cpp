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

#include <cstdio>
#include <deque>
#include <string>

#include "signpipe/error.hpp"
#include "signpipe/extractor.hpp"
#include "signpipe/hashing.hpp"

namespace signpipe::extractor {

double synthetic_keypoint(std::uint64_t seed, std::string_view sample_id, std::int64_t frame, std::int64_t k,
                          std::int64_t c) {
    std::string msg = std::to_string(seed);
    msg.push_back('\x1F');
    msg.append(sample_id);
    msg.push_back('\x1F');
    msg += std::to_string(frame);
    msg.push_back('\x1F');
    msg += std::to_string(k);
    msg.push_back('\x1F');
    msg += std::to_string(c);
    const Digest d = sha256(msg);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u = (u << 8) | d[static_cast<std::size_t>(i)];
    // top 53 bits: u / 2^64 truncated to a double, strictly below 1
    return static_cast<double>(u >> 11) * 0x1.0p-53;
}

std::vector<double> synthetic_block(std::uint64_t seed, std::string_view sample_id,
                                    std::span<const std::int64_t> frames, int keypoints, int channels) {
    const auto kc = static_cast<std::ptrdiff_t>(keypoints) * channels;
    const auto total = static_cast<std::ptrdiff_t>(frames.size()) * kc;
    std::vector<double> out(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(static) if (total >= 1024)
    for (std::ptrdiff_t i = 0; i < total; ++i) {
        const std::ptrdiff_t f = i / kc;
        const std::ptrdiff_t k = (i % kc) / channels;
        const std::ptrdiff_t c = i % channels;
        out[static_cast<std::size_t>(i)] = synthetic_keypoint(seed, sample_id, frames[static_cast<std::size_t>(f)], k, c);
    }
    return out;
}

namespace reference {

std::vector<double> synthetic_block(std::uint64_t seed, std::string_view sample_id,
                                    std::span<const std::int64_t> frames, int keypoints, int channels) {
    std::vector<double> out;
    out.reserve(frames.size() * static_cast<std::size_t>(keypoints * channels));
    for (auto f : frames) {
        for (int k = 0; k < keypoints; ++k) {
            for (int c = 0; c < channels; ++c) out.push_back(synthetic_keypoint(seed, sample_id, f, k, c));
        }
    }
    return out;
}

}  // namespace reference

namespace {

std::uint64_t seed_from(const Json& params) {
    if (!params.is_object() || !params.contains("seed")) return 0;
    const Json& s = params.at("seed");
    if (s.is_number_unsigned()) return s.get<std::uint64_t>();
    if (s.is_number_integer() && s.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(s.get<std::int64_t>());
    fail(Errc::InvalidValue, "synthetic extractor: params.seed must be an unsigned integer");
}

int int_param(const Json& params, const char* key, int fallback) {
    if (!params.is_object() || !params.contains(key)) return fallback;
    if (!params.at(key).is_number_integer()) {
        fail(Errc::InvalidValue, std::string("synthetic extractor: params.") + key + " must be an integer");
    }
    return params.at(key).get<int>();
}

/// Computes replies for a batch, grouping consecutive frames of the same sample so the
/// value kernel sees large blocks.
std::vector<LandmarkResponse> synthetic_replies(std::uint64_t seed, const Handshake& dims,
                                                std::span<const FrameRequest> frames) {
    std::vector<LandmarkResponse> out;
    out.reserve(frames.size());
    std::size_t i = 0;
    while (i < frames.size()) {
        std::size_t j = i;
        std::vector<std::int64_t> indices;
        while (j < frames.size() && frames[j].sample_id == frames[i].sample_id) indices.push_back(frames[j++].index);
        const auto values = synthetic_block(seed, frames[i].sample_id, indices, dims.num_keypoints, dims.channels);
        const auto c = static_cast<std::size_t>(dims.channels);
        const auto kc = static_cast<std::size_t>(dims.num_keypoints) * c;
        for (std::size_t f = 0; f < indices.size(); ++f) {
            LandmarkResponse r;
            r.index = indices[f];
            r.keypoints.resize(static_cast<std::size_t>(dims.num_keypoints));
            for (std::size_t k = 0; k < r.keypoints.size(); ++k) {
                auto first = values.begin() + static_cast<std::ptrdiff_t>(f * kc + k * c);
                r.keypoints[k].assign(first, first + static_cast<std::ptrdiff_t>(c));
            }
            out.push_back(std::move(r));
        }
        i = j;
    }
    return out;
}

class SyntheticBackend final : public ExtractorBackend {
public:
    Handshake handshake(const ExtractorSpec& spec) override {
        seed_ = seed_from(spec.params);
        dims_ = Handshake{int_param(spec.params, "num_keypoints", spec.expected_keypoints),
                          int_param(spec.params, "channels", spec.channels), "synthetic"};
        started_ = true;
        return dims_;
    }

    void submit(std::span<const FrameRequest> frames) override {
        if (!started_) fail(Errc::ProtocolError, "frames before init");
        auto replies = synthetic_replies(seed_, dims_, frames);
        for (auto& r : replies) pending_.emplace_back(std::move(r));
        pending_.emplace_back(protocol::Done{});
    }

    Reply next() override {
        if (pending_.empty()) fail(Errc::ProtocolError, "no outstanding batch");
        Reply r = std::move(pending_.front());
        pending_.pop_front();
        return r;
    }

private:
    bool started_ = false;
    std::uint64_t seed_ = 0;
    Handshake dims_;
    std::deque<Reply> pending_;
};

bool read_line(std::FILE* in, std::string& line) {
    line.clear();
    int ch;
    while ((ch = std::fgetc(in)) != EOF) {
        if (ch == '\n') return true;
        line.push_back(static_cast<char>(ch));
    }
    return !line.empty();
}

void write_line(std::FILE* out, const std::string& line) {
    std::fwrite(line.data(), 1, line.size(), out);
    std::fputc('\n', out);
}

}  // namespace

std::unique_ptr<ExtractorBackend> make_synthetic_backend(const ExtractorSpec&) {
    return std::make_unique<SyntheticBackend>();
}

int serve_synthetic(std::FILE* in, std::FILE* out) {
    std::string line;
    std::optional<Handshake> dims;
    std::uint64_t seed = 0;
    std::vector<FrameRequest> batch;
    while (read_line(in, line)) {
        if (line.empty()) continue;
        try {
            auto msg = protocol::decode_client(line);
            if (auto* init = std::get_if<protocol::Init>(&msg)) {
                seed = seed_from(init->params);
                dims = Handshake{int_param(init->params, "num_keypoints", init->expected_keypoints),
                                 int_param(init->params, "channels", init->channels), "synthetic"};
                if (dims->num_keypoints <= 0 || dims->channels < 2 || dims->channels > 4) {
                    fail(Errc::InvalidValue, "unsupported dims");
                }
                write_line(out, protocol::encode(*dims));
            } else if (auto* frame = std::get_if<FrameRequest>(&msg)) {
                if (!dims) fail(Errc::ProtocolError, "frame before init");
                batch.push_back(std::move(*frame));
            } else {
                if (!dims) fail(Errc::ProtocolError, "end before init");
                for (const auto& r : synthetic_replies(seed, *dims, batch)) write_line(out, protocol::encode(r));
                write_line(out, protocol::encode(protocol::Done{}));
                batch.clear();
            }
            std::fflush(out);
        } catch (const Error& e) {
            write_line(out, protocol::encode(protocol::BackendError{e.what()}));
            std::fflush(out);
            return 2;
        }
    }
    return 0;
}

}  // namespace signpipe::extractor
