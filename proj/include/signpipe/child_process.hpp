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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace signpipe::process {

/// Splits a command template on whitespace. Single or double quotes group a token.
/// No shell is involved at any point.
std::vector<std::string> split_command(std::string_view command);

/// Replaces every "{name}" occurrence inside each argument.
std::vector<std::string> substitute(const std::vector<std::string>& argv,
                                    const std::map<std::string, std::string>& tokens);

/// A child with piped stdin/stdout. The destructor kills and reaps a still-running child.
class ChildProcess {
public:
    /// Throws Error(SpawnFailure) when the program cannot be started.
    /// With merge_stderr the child's stderr joins its stdout pipe.
    explicit ChildProcess(const std::vector<std::string>& argv, bool merge_stderr = false);
    ~ChildProcess();
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    /// False once the child has closed its end.
    bool write_all(std::string_view bytes);
    void close_stdin();
    /// Next '\n'-terminated line without the terminator; nullopt at EOF.
    std::optional<std::string> read_line();
    std::string read_all();
    /// Exit code, or 128 + signal number when killed by a signal.
    int wait();
    /// Polls for exit up to `timeout_ms`; nullopt while still running.
    std::optional<int> wait_for(int timeout_ms);
    void kill();
    pid_t pid() const noexcept { return pid_; }

private:
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
    bool eof_ = false;
    std::optional<int> status_;
};

struct CommandResult {
    int exit_code = 0;
    std::string output;  // stdout and stderr interleaved
};

CommandResult run_command(const std::vector<std::string>& argv);

}  // namespace signpipe::process
