// SPDX-License-Identifier: Apache-2.0
//
// Tool environment: routes a tool call to search or code execution and
// renders the observation text that gets injected back into the transcript.

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "tir/interpreter.hpp"
#include "tir/protocol.hpp"
#include "tir/search.hpp"

namespace tir {

struct ToolBudget {
    std::size_t max_result_bytes = 2048;
    std::uint64_t max_exec_steps = 100000;
    std::size_t max_calls_per_episode = 8;

    /// Throws InvalidConfig unless every field is positive.
    void validate() const;
};

/// Code backend selection. The subprocess command template must contain the
/// placeholder "{file}", which is replaced by the path of a temporary file
/// holding the source. The command runs under /bin/sh.
struct CodeBackend {
    enum class Kind { Builtin, Subprocess };
    Kind kind = Kind::Builtin;
    std::string command_template;
    std::chrono::milliseconds timeout{10000};

    static CodeBackend builtin() { return {}; }
    static CodeBackend subprocess(std::string command_template,
                                  std::chrono::milliseconds timeout = std::chrono::milliseconds{10000}) {
        return {Kind::Subprocess, std::move(command_template), timeout};
    }
};

ExecutionOutcome execute_code(std::string_view source, const ToolBudget& budget,
                              const CodeBackend& backend = CodeBackend::builtin());

/// Exit 0 maps to Output(stdout), any other exit to Failure(stderr). A
/// missing shell or command (exit 127) yields "SandboxUnavailable: ...".
ExecutionOutcome run_subprocess(const std::string& command_template, std::string_view source,
                                std::chrono::milliseconds timeout);

struct ToolEnvironment {
    const SearchIndex* index = nullptr;  // search calls fail in-band without one
    std::size_t top_k = 3;
    CodeBackend code;
    ToolBudget budget;
};

/// Per-episode state; each rollout owns one.
struct EpisodeState {
    std::size_t calls = 0;
};

inline constexpr std::string_view kTruncationMarker = "\xE2\x80\xA6[truncated]";

/// Cuts text to at most max_bytes on a UTF-8 boundary and appends the
/// truncation marker if anything was dropped.
std::string truncate_result(std::string_view text, std::size_t max_bytes);

/// One "title: snippet" line per hit; "(no results)" for an empty list.
/// Line breaks inside snippets are replaced by spaces.
std::string render_hits(const std::vector<SearchHit>& hits, const SearchIndex& index);

/// Runs one tool call. Throws CallBudgetExceeded when the episode has already
/// used max_calls_per_episode calls; otherwise increments the counter.
std::string dispatch(ToolKind tool, std::string_view payload, const ToolEnvironment& env, EpisodeState& state);

}  // namespace tir
