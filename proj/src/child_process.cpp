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

#include "signpipe/child_process.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <mutex>

#include "signpipe/error.hpp"

extern char** environ;

namespace signpipe::process {

std::vector<std::string> split_command(std::string_view command) {
    std::vector<std::string> out;
    std::string cur;
    bool in_token = false;
    char quote = 0;
    for (char ch : command) {
        if (quote) {
            if (ch == quote) quote = 0;
            else cur.push_back(ch);
            continue;
        }
        if (ch == '"' || ch == '\'') {
            quote = ch;
            in_token = true;
        } else if (ch == ' ' || ch == '\t' || ch == '\n') {
            if (in_token) out.push_back(std::move(cur));
            cur.clear();
            in_token = false;
        } else {
            cur.push_back(ch);
            in_token = true;
        }
    }
    if (quote) fail(Errc::InvalidValue, "unterminated quote in command template");
    if (in_token) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> substitute(const std::vector<std::string>& argv,
                                    const std::map<std::string, std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(argv.size());
    for (const auto& arg : argv) {
        std::string result;
        for (std::size_t i = 0; i < arg.size();) {
            if (arg[i] == '{') {
                auto close = arg.find('}', i);
                if (close != std::string::npos) {
                    auto it = tokens.find(arg.substr(i + 1, close - i - 1));
                    if (it != tokens.end()) {
                        result += it->second;
                        i = close + 1;
                        continue;
                    }
                }
            }
            result.push_back(arg[i++]);
        }
        out.push_back(std::move(result));
    }
    return out;
}

namespace {

void ignore_sigpipe_once() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

ChildProcess::ChildProcess(const std::vector<std::string>& argv, bool merge_stderr) {
    if (argv.empty()) fail(Errc::SpawnFailure, "empty command");
    ignore_sigpipe_once();

    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) fail(Errc::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        fail(Errc::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    if (merge_stderr) posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDERR_FILENO);

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    const int rc = posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        pid_ = -1;
        fail(Errc::SpawnFailure, "cannot start '" + argv[0] + "': " + std::strerror(rc));
    }
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];
}

ChildProcess::~ChildProcess() {
    close_stdin();
    if (stdout_fd_ >= 0) close(stdout_fd_);
    if (pid_ > 0 && !status_) {
        ::kill(pid_, SIGKILL);
        wait();
    }
}

bool ChildProcess::write_all(std::string_view bytes) {
    if (stdin_fd_ < 0) return false;
    while (!bytes.empty()) {
        const ssize_t n = ::write(stdin_fd_, bytes.data(), bytes.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

void ChildProcess::close_stdin() {
    if (stdin_fd_ >= 0) {
        close(stdin_fd_);
        stdin_fd_ = -1;
    }
}

std::optional<std::string> ChildProcess::read_line() {
    while (true) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (eof_) {
            if (buffer_.empty()) return std::nullopt;
            std::string rest = std::move(buffer_);
            buffer_.clear();
            return rest;
        }
        char chunk[65536];
        const ssize_t n = ::read(stdout_fd_, chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR) continue;
            eof_ = true;
        } else if (n == 0) {
            eof_ = true;
        } else {
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }
}

std::string ChildProcess::read_all() {
    std::string out = std::move(buffer_);
    buffer_.clear();
    char chunk[65536];
    while (!eof_) {
        const ssize_t n = ::read(stdout_fd_, chunk, sizeof(chunk));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            eof_ = true;
            break;
        }
        out.append(chunk, static_cast<std::size_t>(n));
    }
    return out;
}

int ChildProcess::wait() {
    if (status_) return *status_;
    if (pid_ <= 0) return -1;
    int raw = 0;
    while (waitpid(pid_, &raw, 0) < 0) {
        if (errno != EINTR) {
            status_ = -1;
            return -1;
        }
    }
    if (WIFEXITED(raw)) status_ = WEXITSTATUS(raw);
    else if (WIFSIGNALED(raw)) status_ = 128 + WTERMSIG(raw);
    else status_ = -1;
    return *status_;
}

std::optional<int> ChildProcess::wait_for(int timeout_ms) {
    if (status_) return status_;
    if (pid_ <= 0) return -1;
    for (int waited = 0;; waited += 2) {
        int raw = 0;
        const pid_t r = waitpid(pid_, &raw, WNOHANG);
        if (r == pid_) {
            if (WIFEXITED(raw)) status_ = WEXITSTATUS(raw);
            else if (WIFSIGNALED(raw)) status_ = 128 + WTERMSIG(raw);
            else status_ = -1;
            return status_;
        }
        if (r < 0 && errno != EINTR) {
            status_ = -1;
            return status_;
        }
        if (waited >= timeout_ms) return std::nullopt;
        usleep(2000);
    }
}

void ChildProcess::kill() {
    if (pid_ > 0 && !status_) ::kill(pid_, SIGKILL);
}

CommandResult run_command(const std::vector<std::string>& argv) {
    ChildProcess child(argv, /*merge_stderr=*/true);
    child.close_stdin();
    CommandResult result;
    result.output = child.read_all();
    result.exit_code = child.wait();
    return result;
}

}  // namespace signpipe::process
