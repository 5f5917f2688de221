// SPDX-License-Identifier: Apache-2.0
//
// Policy backends: the model that continues a transcript.

#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tir/protocol.hpp"
#include "tir/tasks.hpp"
#include "tir/toolworld.hpp"

namespace tir {

struct BackendCapabilities {
    bool supports_stop_sequences = false;
    std::size_t max_context_units = 32768;
};

struct CompletionRequest {
    std::string task_id;
    std::string question;
    TaskDomain domain = TaskDomain::OpenDomain;
    std::string prompt;      // rendered template
    std::string transcript;  // assistant text so far
    std::vector<std::string> stop;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    std::size_t step = 0;  // completions already issued in this rollout
};

enum class FinishReason { Stop, Length, EndOfText };

std::string_view to_string(FinishReason f) noexcept;

struct Completion {
    std::string text;
    FinishReason finish = FinishReason::Stop;
    std::optional<std::string> matched_stop;  // when the backend reports it
};

/// Implementations must be safe to call from several rollouts at once.
class PolicyBackend {
public:
    virtual ~PolicyBackend() = default;
    virtual BackendCapabilities capabilities() const = 0;
    virtual Completion complete(const CompletionRequest& request) = 0;
};

/// Replays fixed turns per task id: turn i answers the i-th request of a
/// rollout. Once the turns run out the backend reports EndOfText. Stop
/// sequences are not honoured, so the rollout cuts turns client side.
class ScriptedBackend final : public PolicyBackend {
public:
    explicit ScriptedBackend(std::map<std::string, std::vector<std::string>> scripts);

    /// JSONL of {"id": ..., "turns": [...]}. Throws InvalidConfig(line).
    static ScriptedBackend from_jsonl(std::istream& in);
    static ScriptedBackend from_file(const std::filesystem::path& path);

    bool has_script(const std::string& task_id) const;

    BackendCapabilities capabilities() const override { return {false, 1u << 20}; }
    Completion complete(const CompletionRequest& request) override;

private:
    std::map<std::string, std::vector<std::string>> scripts_;
};

/// Emits transcripts from a ToolWorld policy. The first request samples an
/// action; a tool action produces one call and the answer follows the
/// result. Whether the answer is right is drawn from the task's success
/// probability for that action. Everything is a function of the request
/// seed, so rollouts are reproducible. Behaves like a server that honours
/// stop sequences and drops the matched stop text.
class ToyBackend final : public PolicyBackend {
public:
    ToyBackend(ToyPolicy policy, std::span<const Task> tasks);

    BackendCapabilities capabilities() const override { return {true, 1u << 20}; }
    Completion complete(const CompletionRequest& request) override;

private:
    ToyPolicy policy_;
    std::map<std::string, std::string> answers_;  // task id -> reference answer
};

}  // namespace tir
