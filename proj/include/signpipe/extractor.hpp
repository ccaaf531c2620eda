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

#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "signpipe/canonical_json.hpp"
#include "signpipe/geometry.hpp"
#include "signpipe/posepost.hpp"

namespace signpipe::extractor {

struct ExtractorSpec {
    std::string backend_name;
    std::optional<std::string> command;  // external command template
    Json params = Json::object();
    int expected_keypoints = 0;
    int channels = 4;
};

enum class Transport { InlineRgb, FileRef };

struct FrameRequest {
    std::int64_t index = 0;  // position within the clip
    int width = 0;
    int height = 0;
    std::optional<geometry::Box> bbox;  // signer-region hint; backends decide how to use it
    std::string sample_id;
    Transport transport = Transport::FileRef;
    std::string rgb;             // inline_rgb: raw width*height*3 bytes
    std::string path;            // file_ref
    std::int64_t frame_index = 0;  // file_ref: source frame number

    friend bool operator==(const FrameRequest&, const FrameRequest&) = default;
};

struct LandmarkResponse {
    std::int64_t index = 0;
    bool no_detection = false;
    std::vector<std::vector<double>> keypoints;  // K rows of C values when detected

    friend bool operator==(const LandmarkResponse&, const LandmarkResponse&) = default;
};

struct Handshake {
    int num_keypoints = 0;
    int channels = 0;
    std::string backend;

    friend bool operator==(const Handshake&, const Handshake&) = default;
};

// ---- wire protocol ----------------------------------------------------------
// One canonical JSON object per line, UTF-8. See docs/protocol.md.

namespace protocol {

struct Init {
    std::string backend;
    int expected_keypoints = 0;
    int channels = 0;
    Json params = Json::object();
};
struct End {};
struct Done {};
struct BackendError {
    std::string message;
};

using ClientMessage = std::variant<Init, FrameRequest, End>;
using BackendMessage = std::variant<Handshake, LandmarkResponse, Done, BackendError>;

std::string encode(const Init& init);
std::string encode(const FrameRequest& frame);
std::string encode(const End&);
std::string encode(const Handshake& ready);
std::string encode(const LandmarkResponse& response);
std::string encode(const Done&);
std::string encode(const BackendError& error);

/// Throw Error(ProtocolError) on anything that is not a well-formed message.
ClientMessage decode_client(std::string_view line);
BackendMessage decode_backend(std::string_view line);

}  // namespace protocol

// ---- backends ------------------------------------------------------------

/// What a backend says after a batch of frames: one reply per frame, then Done.
using Reply = std::variant<LandmarkResponse, protocol::Done>;

/// A landmark engine session. Frames go out in batches terminated by `end`; replies
/// arrive in any order.
class ExtractorBackend {
public:
    virtual ~ExtractorBackend() = default;
    /// init -> ready. Throws SpawnFailure or ProtocolError.
    virtual Handshake handshake(const ExtractorSpec& spec) = 0;
    virtual void submit(std::span<const FrameRequest> frames) = 0;
    /// Throws BackendCrash when the engine dies or reports an error, ProtocolError on
    /// malformed output.
    virtual Reply next() = 0;
};

using BackendFactory = std::function<std::unique_ptr<ExtractorBackend>(const ExtractorSpec&)>;

/// Speaks the wire protocol to a child process started from spec.command.
std::unique_ptr<ExtractorBackend> make_command_backend(const ExtractorSpec& spec);

/// Deterministic hash-derived landmarks; never reads pixels. Reports
/// params.num_keypoints / params.channels when present, else the ExtractorSpec expectations.
std::unique_ptr<ExtractorBackend> make_synthetic_backend(const ExtractorSpec& spec);

/// Starts the backend and checks its dims. Throws HandshakeMismatch on disagreement.
Handshake handshake(ExtractorBackend& backend, const ExtractorSpec& spec);

/// Sends the frames, matches replies to requests by index, and assembles a
/// (frames x K x C) clip. no_detection frames become zeros with visibility 0.
posepost::LandmarkClip extract_clip(ExtractorBackend& backend, std::span<const FrameRequest> frames,
                                    const ExtractorSpec& spec, const Handshake& ready,
                                    const std::optional<geometry::Box>& bbox = std::nullopt);

/// Owns one backend for one worker; restarts it after a crash or protocol error.
class ExtractorSession {
public:
    ExtractorSession(BackendFactory factory, ExtractorSpec spec);

    const Handshake& ready();
    posepost::LandmarkClip extract(std::span<const FrameRequest> frames, const std::optional<geometry::Box>& bbox);
    std::size_t restarts() const noexcept { return restarts_; }

private:
    BackendFactory factory_;
    ExtractorSpec spec_;
    std::unique_ptr<ExtractorBackend> backend_;
    Handshake handshake_;
    std::size_t restarts_ = 0;
};

// ---- synthetic values ----------------------------------------------------

/// SHA-256 of "seed\x1Fsample_id\x1Fframe\x1Fk\x1Fc" (decimal integers); the first
/// 8 digest bytes read big-endian as u; returns u / 2^64 rounded toward zero to
/// double precision, so the result is always in [0, 1).
double synthetic_keypoint(std::uint64_t seed, std::string_view sample_id, std::int64_t frame, std::int64_t k,
                          std::int64_t c);

/// All values for a batch of frames, laid out (frame, k, c) row-major. Parallel over values.
std::vector<double> synthetic_block(std::uint64_t seed, std::string_view sample_id,
                                    std::span<const std::int64_t> frames, int keypoints, int channels);

namespace reference {
std::vector<double> synthetic_block(std::uint64_t seed, std::string_view sample_id,
                                    std::span<const std::int64_t> frames, int keypoints, int channels);
}  // namespace reference

/// Serves the synthetic backend over line streams until EOF; returns the exit code.
int serve_synthetic(std::FILE* in, std::FILE* out);

}  // namespace signpipe::extractor
