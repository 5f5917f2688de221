// SPDX-License-Identifier: Apache-2.0
//
// Rollout loop: ask the backend to continue, execute tool calls, inject
// results, stop on an answer or a budget, then score.

#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tir/backend.hpp"
#include "tir/reward.hpp"
#include "tir/tasks.hpp"
#include "tir/templates.hpp"
#include "tir/tool_env.hpp"

namespace tir {

struct RolloutBudget {
    std::size_t max_steps = 8;  // backend completions per rollout
    std::size_t max_transcript_bytes = 32768;

    void validate() const;  // throws InvalidConfig
};

enum class Termination {
    Answered,          // a \boxed{} answer was produced
    BackendFinished,   // the backend ended without an answer
    CallBudget,        // tool budget hit and the forced answer had no \boxed{}
    StepBudget,
    TranscriptBudget,
};

std::string_view to_string(Termination t) noexcept;
std::optional<Termination> parse_termination(std::string_view name) noexcept;

/// Step and transcript budget exhaustion score r_out = 0.
bool budget_exhausted(Termination t) noexcept;

struct RolloutOptions {
    PromptTemplate prompt = default_template(PromptMode::ToolAssisted);
    RolloutBudget budget;
    RewardConfig reward;
    double temperature = 1.0;
    std::uint64_t seed = 0;
};

struct RolloutResult {
    Task task;
    PromptMode mode = PromptMode::ToolAssisted;
    std::string transcript;
    Trajectory trajectory;
    RewardBreakdown reward;
    Termination termination = Termination::BackendFinished;
    std::size_t steps = 0;
    bool truncated = false;      // transcript cut at the byte budget
    bool tools_demoted = false;  // standalone run where the backend emitted tool tags
    bool well_formed = false;    // transcript passes the strict parser
    std::optional<std::string> predicted;
    bool correct = false;
};

/// Runs one episode. Tool failures are injected as "Error: ..." results;
/// only backend errors propagate. `seed` is passed through to the backend.
RolloutResult run_rollout(const Task& task, PolicyBackend& backend, const ToolEnvironment& env,
                          const RolloutOptions& options);

/// Runs every task with up to `parallelism` concurrent rollouts and returns
/// results in task order. Task i uses seed derive_seed(options.seed, i, 0).
/// The first backend error is rethrown after all workers stop.
std::vector<RolloutResult> run_rollouts(std::span<const Task> tasks, PolicyBackend& backend,
                                        const ToolEnvironment& env, const RolloutOptions& options,
                                        std::size_t parallelism = 1);

/// One trajectory log line. A superset of the episode log read by the
/// metrics module.
nlohmann::json to_json(const RolloutResult& r);
nlohmann::json segments_to_json(std::span<const Segment> segments);
RewardBreakdown reward_from_json(const nlohmann::json& j);

struct RescoredEntry {
    std::string id;
    RewardBreakdown logged;
    RewardBreakdown recomputed;
    bool matches = false;  // bitwise equality of r_act, r_out, r and equal flags
};

/// Re-derives the trajectory from the logged transcript and rescores it.
/// Throws MalformedLog when fields are missing or the logged segments
/// disagree with the transcript.
RescoredEntry rescore_entry(const nlohmann::json& line, const RewardConfig& cfg);
/// Throws MalformedLog(line).
std::vector<RescoredEntry> rescore_log(std::istream& in, const RewardConfig& cfg);
nlohmann::json to_json(const RescoredEntry& e);

}  // namespace tir
