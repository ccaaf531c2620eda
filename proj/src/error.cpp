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

#include "signpipe/error.hpp"

namespace signpipe {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::ParseError: return "ParseError";
        case Errc::UnknownField: return "UnknownField";
        case Errc::InvalidValue: return "InvalidValue";
        case Errc::UnknownAdapter: return "UnknownAdapter";
        case Errc::SourceUnreadable: return "SourceUnreadable";
        case Errc::SchemaError: return "SchemaError";
        case Errc::AmbiguousAlias: return "AmbiguousAlias";
        case Errc::DuplicateName: return "DuplicateName";
        case Errc::UnknownName: return "UnknownName";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::Unsatisfiable: return "Unsatisfiable";
        case Errc::DegenerateBox: return "DegenerateBox";
        case Errc::BackendMismatch: return "BackendMismatch";
        case Errc::IndexOutOfRange: return "IndexOutOfRange";
        case Errc::NoValidPoints: return "NoValidPoints";
        case Errc::NoDepthChannel: return "NoDepthChannel";
        case Errc::SpawnFailure: return "SpawnFailure";
        case Errc::HandshakeMismatch: return "HandshakeMismatch";
        case Errc::ProtocolError: return "ProtocolError";
        case Errc::BackendCrash: return "BackendCrash";
        case Errc::Unreadable: return "Unreadable";
        case Errc::BadMetadata: return "BadMetadata";
        case Errc::InvalidRange: return "InvalidRange";
        case Errc::DecodeFailure: return "DecodeFailure";
        case Errc::CommandFailure: return "CommandFailure";
        case Errc::DuplicateKey: return "DuplicateKey";
        case Errc::WriteFailure: return "WriteFailure";
        case Errc::MalformedShard: return "MalformedShard";
        case Errc::StageFailure: return "StageFailure";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message) : std::runtime_error(message), code_(code) {}

namespace {

std::string unknown_name_message(const std::string& kind, const std::string& name,
                                 const std::vector<std::string>& suggestions) {
    std::string msg = "unknown " + kind + " '" + name + "'";
    if (!suggestions.empty()) {
        msg += "; did you mean:";
        for (std::size_t i = 0; i < suggestions.size(); ++i) {
            msg += (i == 0 ? " " : ", ");
            msg += suggestions[i];
        }
    }
    return msg;
}

}  // namespace

UnknownNameError::UnknownNameError(std::string kind, std::string name,
                                   std::vector<std::string> suggestions)
    : Error(Errc::UnknownName, unknown_name_message(kind, name, suggestions)),
      kind_(std::move(kind)),
      name_(std::move(name)),
      suggestions_(std::move(suggestions)) {}

StageFailure::StageFailure(std::string stage, Errc cause, const std::string& message)
    : Error(Errc::StageFailure, "stage '" + stage + "' failed (" + std::string(to_string(cause)) +
                                    "): " + message),
      stage_(std::move(stage)),
      cause_(cause),
      detail_(message) {}

}  // namespace signpipe
