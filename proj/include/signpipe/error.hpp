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

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace signpipe {

enum class Errc {
    // config
    ParseError,
    UnknownField,
    InvalidValue,
    // manifest
    UnknownAdapter,
    SourceUnreadable,
    SchemaError,
    AmbiguousAlias,
    // registry
    DuplicateName,
    UnknownName,
    // geometry
    EmptyInput,
    Unsatisfiable,
    DegenerateBox,
    // posepost
    BackendMismatch,
    IndexOutOfRange,
    NoValidPoints,
    NoDepthChannel,
    // extractor
    SpawnFailure,
    HandshakeMismatch,
    ProtocolError,
    BackendCrash,
    // mediaio
    Unreadable,
    BadMetadata,
    InvalidRange,
    DecodeFailure,
    CommandFailure,
    // export
    DuplicateKey,
    WriteFailure,
    MalformedShard,
    // pipeline
    StageFailure,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

class UnknownNameError : public Error {
public:
    UnknownNameError(std::string kind, std::string name, std::vector<std::string> suggestions);

    const std::string& kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& suggestions() const noexcept { return suggestions_; }

private:
    std::string kind_;
    std::string name_;
    std::vector<std::string> suggestions_;
};

class StageFailure : public Error {
public:
    StageFailure(std::string stage, Errc cause, const std::string& message);

    const std::string& stage() const noexcept { return stage_; }
    Errc cause() const noexcept { return cause_; }
    /// The message without the stage/cause prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string stage_;
    Errc cause_;
    std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace signpipe
