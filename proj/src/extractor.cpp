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

#include "signpipe/extractor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "signpipe/child_process.hpp"
#include "signpipe/error.hpp"
#include "signpipe/hashing.hpp"

namespace signpipe::extractor {

namespace protocol {

namespace {

[[noreturn]] void bad(const std::string& what) { fail(Errc::ProtocolError, what); }

Json parse_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    Json j;
    try {
        j = Json::parse(line);
    } catch (const Json::exception&) {
        bad("malformed line: " + std::string(line.substr(0, 120)));
    }
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) bad("message without a type");
    return j;
}

void only_fields(const Json& j, std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) bad("unexpected field '" + it.key() + "' in " + j.at("type").get<std::string>() + " message");
    }
}

std::int64_t get_int(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number_integer()) bad(std::string("field '") + key + "' must be an integer");
    return j.at(key).get<std::int64_t>();
}

std::string get_string(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) bad(std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

Json box_json(const std::optional<geometry::Box>& b) {
    if (!b) return nullptr;
    return Json::array({b->x0, b->y0, b->x1, b->y1});
}

}  // namespace

std::string encode(const Init& init) {
    return canonical_dump({{"type", "init"},
                           {"backend", init.backend},
                           {"expected_keypoints", init.expected_keypoints},
                           {"channels", init.channels},
                           {"params", init.params}});
}

std::string encode(const FrameRequest& f) {
    Json j = {{"type", "frame"},
              {"index", f.index},
              {"width", f.width},
              {"height", f.height},
              {"bbox", box_json(f.bbox)},
              {"sample_id", f.sample_id}};
    if (f.transport == Transport::InlineRgb) {
        j["transport"] = "inline_rgb";
        j["payload"] = base64_encode(
            std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(f.rgb.data()), f.rgb.size()));
    } else {
        j["transport"] = "file_ref";
        j["payload"] = {{"path", f.path}, {"frame_index", f.frame_index}};
    }
    return canonical_dump(j);
}

std::string encode(const End&) { return R"({"type":"end"})"; }
std::string encode(const Done&) { return R"({"type":"done"})"; }

std::string encode(const Handshake& ready) {
    return canonical_dump(
        {{"type", "ready"}, {"backend", ready.backend}, {"num_keypoints", ready.num_keypoints}, {"channels", ready.channels}});
}

std::string encode(const LandmarkResponse& r) {
    if (r.no_detection) return canonical_dump({{"type", "no_detection"}, {"index", r.index}});
    Json rows = Json::array();
    for (const auto& row : r.keypoints) rows.push_back(row);
    return canonical_dump({{"type", "landmarks"}, {"index", r.index}, {"keypoints", rows}});
}

std::string encode(const BackendError& e) { return canonical_dump({{"type", "error"}, {"message", e.message}}); }

ClientMessage decode_client(std::string_view line) {
    const Json j = parse_line(line);
    const auto& type = j.at("type").get_ref<const std::string&>();
    if (type == "init") {
        only_fields(j, {"type", "backend", "expected_keypoints", "channels", "params"});
        Init init;
        init.backend = get_string(j, "backend");
        init.expected_keypoints = static_cast<int>(get_int(j, "expected_keypoints"));
        init.channels = static_cast<int>(get_int(j, "channels"));
        if (j.contains("params")) {
            if (!j.at("params").is_object()) bad("init params must be an object");
            init.params = j.at("params");
        }
        return init;
    }
    if (type == "frame") {
        only_fields(j, {"type", "index", "width", "height", "bbox", "sample_id", "transport", "payload"});
        FrameRequest f;
        f.index = get_int(j, "index");
        f.width = static_cast<int>(get_int(j, "width"));
        f.height = static_cast<int>(get_int(j, "height"));
        if (f.width < 0 || f.height < 0) bad("negative frame dims");
        if (j.contains("bbox") && !j.at("bbox").is_null()) {
            const Json& b = j.at("bbox");
            if (!b.is_array() || b.size() != 4) bad("bbox must be [x0, y0, x1, y1] or null");
            for (const auto& v : b) {
                if (!v.is_number()) bad("bbox values must be numbers");
            }
            f.bbox = geometry::Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        }
        if (j.contains("sample_id")) f.sample_id = get_string(j, "sample_id");
        const std::string transport = get_string(j, "transport");
        if (!j.contains("payload")) bad("frame without payload");
        const Json& payload = j.at("payload");
        if (transport == "inline_rgb") {
            f.transport = Transport::InlineRgb;
            if (!payload.is_string()) bad("inline_rgb payload must be base64 text");
            try {
                f.rgb = base64_decode(payload.get<std::string>());
            } catch (const Error&) {
                bad("inline_rgb payload is not valid base64");
            }
            if (f.rgb.size() != static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height) * 3) {
                bad("inline_rgb payload length != width*height*3");
            }
        } else if (transport == "file_ref") {
            f.transport = Transport::FileRef;
            if (!payload.is_object()) bad("file_ref payload must be {path, frame_index}");
            f.path = get_string(payload, "path");
            f.frame_index = get_int(payload, "frame_index");
        } else {
            bad("unknown transport '" + transport + "'");
        }
        return f;
    }
    if (type == "end") {
        only_fields(j, {"type"});
        return End{};
    }
    bad("unknown client message type '" + type + "'");
}

BackendMessage decode_backend(std::string_view line) {
    const Json j = parse_line(line);
    const auto& type = j.at("type").get_ref<const std::string&>();
    if (type == "ready") {
        only_fields(j, {"type", "backend", "num_keypoints", "channels"});
        return Handshake{static_cast<int>(get_int(j, "num_keypoints")), static_cast<int>(get_int(j, "channels")),
                         get_string(j, "backend")};
    }
    if (type == "landmarks") {
        only_fields(j, {"type", "index", "keypoints"});
        LandmarkResponse r;
        r.index = get_int(j, "index");
        if (!j.contains("keypoints") || !j.at("keypoints").is_array()) bad("keypoints must be a list");
        for (const auto& row : j.at("keypoints")) {
            if (!row.is_array()) bad("each keypoint must be a list of numbers");
            std::vector<double> values;
            values.reserve(row.size());
            for (const auto& v : row) {
                if (!v.is_number()) bad("keypoint values must be numbers");
                values.push_back(v.get<double>());
            }
            r.keypoints.push_back(std::move(values));
        }
        return r;
    }
    if (type == "no_detection") {
        only_fields(j, {"type", "index"});
        LandmarkResponse r;
        r.index = get_int(j, "index");
        r.no_detection = true;
        return r;
    }
    if (type == "done") {
        only_fields(j, {"type"});
        return Done{};
    }
    if (type == "error") {
        only_fields(j, {"type", "message"});
        return BackendError{get_string(j, "message")};
    }
    bad("unknown backend message type '" + type + "'");
}

}  // namespace protocol

// ---------------------------------------------------------------------------

namespace {

class CommandBackend final : public ExtractorBackend {
public:
    explicit CommandBackend(const ExtractorSpec& spec) {
        if (!spec.command || spec.command->empty()) {
            fail(Errc::SpawnFailure, "extractor '" + spec.backend_name + "' has no command");
        }
        child_ = std::make_unique<process::ChildProcess>(process::split_command(*spec.command));
    }

    ~CommandBackend() override {
        if (writer_.joinable()) {
            if (!writer_done_) child_->kill();
            writer_.join();
        }
        child_->close_stdin();
        if (!child_->wait_for(2000)) child_->kill();
    }

    Handshake handshake(const ExtractorSpec& spec) override {
        protocol::Init init{spec.backend_name, spec.expected_keypoints, spec.channels, spec.params};
        if (!child_->write_all(protocol::encode(init) + "\n")) {
            fail(Errc::SpawnFailure, "extractor '" + spec.backend_name + "' closed its input before init");
        }
        auto line = child_->read_line();
        if (!line) {
            const int status = child_->wait();
            fail(Errc::SpawnFailure,
                 "extractor '" + spec.backend_name + "' exited (status " + std::to_string(status) + ") before ready");
        }
        auto msg = protocol::decode_backend(*line);
        if (auto* err = std::get_if<protocol::BackendError>(&msg)) {
            fail(Errc::SpawnFailure, "extractor '" + spec.backend_name + "' failed to start: " + err->message);
        }
        auto* ready = std::get_if<Handshake>(&msg);
        if (!ready) fail(Errc::ProtocolError, "expected ready, got: " + *line);
        return *ready;
    }

    void submit(std::span<const FrameRequest> frames) override {
        if (writer_.joinable()) writer_.join();
        std::string payload;
        for (const auto& f : frames) {
            payload += protocol::encode(f);
            payload.push_back('\n');
        }
        payload += protocol::encode(protocol::End{});
        payload.push_back('\n');
        writer_done_ = false;
        writer_ = std::thread([this, payload = std::move(payload)] {
            child_->write_all(payload);
            writer_done_ = true;
        });
    }

    Reply next() override {
        auto line = child_->read_line();
        if (!line) {
            if (writer_.joinable()) writer_.join();
            const int status = child_->wait();
            if (status != 0) {
                fail(Errc::BackendCrash, "extractor exited with status " + std::to_string(status) + " mid-stream");
            }
            fail(Errc::ProtocolError, "premature end of extractor output");
        }
        auto msg = protocol::decode_backend(*line);
        if (auto* r = std::get_if<LandmarkResponse>(&msg)) return std::move(*r);
        if (std::holds_alternative<protocol::Done>(msg)) return protocol::Done{};
        if (auto* err = std::get_if<protocol::BackendError>(&msg)) {
            fail(Errc::BackendCrash, "extractor reported an error: " + err->message);
        }
        fail(Errc::ProtocolError, "unexpected message mid-stream: " + *line);
    }

private:
    std::unique_ptr<process::ChildProcess> child_;
    std::thread writer_;
    std::atomic<bool> writer_done_{true};
};

}  // namespace

std::unique_ptr<ExtractorBackend> make_command_backend(const ExtractorSpec& spec) {
    return std::make_unique<CommandBackend>(spec);
}

Handshake handshake(ExtractorBackend& backend, const ExtractorSpec& spec) {
    Handshake ready = backend.handshake(spec);
    if (ready.num_keypoints != spec.expected_keypoints || ready.channels != spec.channels) {
        fail(Errc::HandshakeMismatch, "extractor '" + spec.backend_name + "' reports " +
                                          std::to_string(ready.num_keypoints) + "x" + std::to_string(ready.channels) +
                                          ", config expects " + std::to_string(spec.expected_keypoints) + "x" +
                                          std::to_string(spec.channels));
    }
    return ready;
}

posepost::LandmarkClip extract_clip(ExtractorBackend& backend, std::span<const FrameRequest> frames,
                                    const ExtractorSpec& spec, const Handshake& ready,
                                    const std::optional<geometry::Box>& bbox) {
    if (frames.empty()) fail(Errc::InvalidValue, "extract_clip: no frames");
    std::map<std::int64_t, std::size_t> position;
    std::vector<FrameRequest> requests(frames.begin(), frames.end());
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (!position.emplace(requests[i].index, i).second) {
            fail(Errc::InvalidValue, "extract_clip: duplicate frame index " + std::to_string(requests[i].index));
        }
        if (bbox) requests[i].bbox = bbox;
    }

    const auto channels = posepost::channels_for_count(ready.channels);
    const auto vis = std::find(channels.begin(), channels.end(), posepost::Channel::Visibility) - channels.begin();
    posepost::LandmarkClip clip(requests.size(), static_cast<std::size_t>(ready.num_keypoints), channels);
    clip.backend_name = spec.backend_name;
    clip.space = posepost::Space::FrameNormalized;
    clip.sample_id = requests.front().sample_id;

    backend.submit(requests);
    std::vector<bool> answered(requests.size(), false);
    std::size_t received = 0;
    while (true) {
        Reply reply = backend.next();
        if (std::holds_alternative<protocol::Done>(reply)) break;
        auto& r = std::get<LandmarkResponse>(reply);
        auto it = position.find(r.index);
        if (it == position.end()) fail(Errc::ProtocolError, "response for unknown frame " + std::to_string(r.index));
        if (answered[it->second]) fail(Errc::ProtocolError, "duplicate response for frame " + std::to_string(r.index));
        answered[it->second] = true;
        ++received;
        if (r.no_detection) continue;  // already zero, visibility 0
        if (r.keypoints.size() != clip.keypoints) {
            fail(Errc::ProtocolError, "frame " + std::to_string(r.index) + ": " + std::to_string(r.keypoints.size()) +
                                          " keypoints, handshake said " + std::to_string(clip.keypoints));
        }
        for (std::size_t k = 0; k < clip.keypoints; ++k) {
            const auto& row = r.keypoints[k];
            if (row.size() != clip.channel_count()) {
                fail(Errc::ProtocolError, "frame " + std::to_string(r.index) + ": keypoint with " +
                                              std::to_string(row.size()) + " channels");
            }
            for (std::size_t c = 0; c < row.size(); ++c) {
                const double v = row[c];
                if (!std::isfinite(v)) fail(Errc::ProtocolError, "non-finite landmark value");
                if (static_cast<std::ptrdiff_t>(c) == vis && (v < 0 || v > 1)) {
                    fail(Errc::ProtocolError, "visibility outside [0,1]");
                }
                clip.at(it->second, k, c) = v;
            }
        }
    }
    if (received != requests.size()) {
        fail(Errc::ProtocolError, "backend answered " + std::to_string(received) + " of " +
                                      std::to_string(requests.size()) + " frames");
    }
    return clip;
}

ExtractorSession::ExtractorSession(BackendFactory factory, ExtractorSpec spec)
    : factory_(std::move(factory)), spec_(std::move(spec)) {}

const Handshake& ExtractorSession::ready() {
    if (!backend_) {
        auto backend = factory_(spec_);
        handshake_ = handshake(*backend, spec_);
        backend_ = std::move(backend);
    }
    return handshake_;
}

posepost::LandmarkClip ExtractorSession::extract(std::span<const FrameRequest> frames,
                                                 const std::optional<geometry::Box>& bbox) {
    ready();
    try {
        return extract_clip(*backend_, frames, spec_, handshake_, bbox);
    } catch (const Error& e) {
        if (e.code() == Errc::BackendCrash || e.code() == Errc::ProtocolError) {
            backend_.reset();
            ++restarts_;
        }
        throw;
    }
}

}  // namespace signpipe::extractor
