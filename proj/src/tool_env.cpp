// SPDX-License-Identifier: Apache-2.0
#include "tir/tool_env.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "tir/error.hpp"

namespace tir {

void ToolBudget::validate() const {
    if (max_result_bytes == 0) throw Error(ErrorCode::InvalidConfig, "max_result_bytes must be positive");
    if (max_exec_steps == 0) throw Error(ErrorCode::InvalidConfig, "max_exec_steps must be positive");
    if (max_calls_per_episode == 0) throw Error(ErrorCode::InvalidConfig, "max_calls_per_episode must be positive");
}

ExecutionOutcome execute_code(std::string_view source, const ToolBudget& budget, const CodeBackend& backend) {
    if (backend.kind == CodeBackend::Kind::Subprocess) {
        return run_subprocess(backend.command_template, source, backend.timeout);
    }
    return run_program(source, budget.max_exec_steps);
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

class TempFile {
public:
    explicit TempFile(std::string_view contents) {
        std::string pattern = (std::filesystem::temp_directory_path() / "tir-code-XXXXXX").string();
        const int fd = ::mkstemp(pattern.data());
        if (fd < 0) return;
        path_ = pattern;
        std::size_t off = 0;
        while (off < contents.size()) {
            const auto n = ::write(fd, contents.data() + off, contents.size() - off);
            if (n <= 0) break;
            off += static_cast<std::size_t>(n);
        }
        ::close(fd);
    }
    ~TempFile() {
        if (!path_.empty()) ::unlink(path_.c_str());
    }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

}  // namespace

ExecutionOutcome run_subprocess(const std::string& command_template, std::string_view source,
                                std::chrono::milliseconds timeout) {
    const auto placeholder = command_template.find("{file}");
    if (placeholder == std::string::npos) {
        return ExecutionOutcome::failure("SandboxUnavailable: command template has no {file} placeholder");
    }
    TempFile file(source);
    if (file.path().empty()) return ExecutionOutcome::failure("SandboxUnavailable: cannot create temporary file");
    std::string command = command_template;
    command.replace(placeholder, 6, shell_quote(file.path()));

    int out_pipe[2];
    int err_pipe[2];
    if (::pipe(out_pipe) != 0) return ExecutionOutcome::failure("SandboxUnavailable: pipe failed");
    if (::pipe(err_pipe) != 0) {
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        return ExecutionOutcome::failure("SandboxUnavailable: pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
        return ExecutionOutcome::failure("SandboxUnavailable: fork failed");
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        ::close(out_pipe[0]);
        ::close(err_pipe[0]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);

    std::string out, err;
    bool timed_out = false;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    int open_fds = 2;
    char buf[4096];
    while (open_fds > 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            break;
        }
        const int rc = ::poll(fds, 2, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) continue;
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const auto n = ::read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                (i == 0 ? out : err).append(buf, static_cast<std::size_t>(n));
            } else {
                ::close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    if (timed_out) ::kill(-pid, SIGKILL);
    for (auto& f : fds) {
        if (f.fd >= 0) ::close(f.fd);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) {
        return ExecutionOutcome::failure("Timeout: execution exceeded " + std::to_string(timeout.count()) + " ms");
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return ExecutionOutcome::output(out);
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
        return ExecutionOutcome::failure("SandboxUnavailable: " + (err.empty() ? std::string("command not found") : err));
    }
    if (err.empty()) {
        err = WIFSIGNALED(status) ? "terminated by signal " + std::to_string(WTERMSIG(status))
                                  : "exit status " + std::to_string(WEXITSTATUS(status));
    }
    return ExecutionOutcome::failure(err);
}

std::string truncate_result(std::string_view text, std::size_t max_bytes) {
    if (text.size() <= max_bytes) return std::string(text);
    std::string out(utf8_prefix(text, max_bytes));
    out += kTruncationMarker;
    return out;
}

std::string render_hits(const std::vector<SearchHit>& hits, const SearchIndex& index) {
    if (hits.empty()) return "(no results)";
    const auto& docs = index.documents();
    std::string out;
    for (const auto& hit : hits) {
        const auto it = std::lower_bound(docs.begin(), docs.end(), hit.doc_id,
                                         [](const Document& d, const std::string& id) { return d.id < id; });
        const std::string title = (it != docs.end() && it->id == hit.doc_id) ? it->title : hit.doc_id;
        std::string line = title + ": " + hit.snippet;
        std::replace(line.begin(), line.end(), '\n', ' ');
        if (!out.empty()) out += '\n';
        out += line;
    }
    return out;
}

std::string dispatch(ToolKind tool, std::string_view payload, const ToolEnvironment& env, EpisodeState& state) {
    if (state.calls >= env.budget.max_calls_per_episode) {
        throw Error(ErrorCode::CallBudgetExceeded,
                    "episode already used " + std::to_string(state.calls) + " tool calls");
    }
    ++state.calls;
    std::string text;
    if (tool == ToolKind::Search) {
        if (env.index == nullptr) {
            text = "Error: no search index loaded";
        } else {
            text = render_hits(env.index->search(payload, env.top_k, env.budget.max_result_bytes), *env.index);
        }
    } else {
        const auto outcome = execute_code(payload, env.budget, env.code);
        text = outcome.ok() ? outcome.text : "Error: " + outcome.text;
    }
    return truncate_result(text, env.budget.max_result_bytes);
}

}  // namespace tir
