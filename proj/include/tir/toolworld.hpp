// SPDX-License-Identifier: Apache-2.0
//
// ToolWorld: a synthetic multi-domain environment and a tabular softmax
// policy over {UseSearch, UseCode, NoTool}, trained with GRPO.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "tir/grpo.hpp"
#include "tir/protocol.hpp"
#include "tir/reward.hpp"

namespace tir {

enum class ToyAction { UseSearch = 0, UseCode = 1, NoTool = 2 };
inline constexpr std::size_t kNumToyActions = 3;
inline constexpr std::size_t kNumDomains = 3;

std::string_view to_string(ToyAction a) noexcept;
std::set<ToolKind> invoked_tools(ToyAction a);

/// Correct tool for a domain; nullopt for open domain.
std::optional<ToyAction> correct_action(TaskDomain domain) noexcept;

using ActionProbs = std::array<double, kNumToyActions>;

struct ToyPolicy {
    /// logits[domain][action]
    std::array<std::array<double, kNumToyActions>, kNumDomains> logits{};

    ActionProbs probabilities(TaskDomain domain, double temperature) const;
    double log_prob(TaskDomain domain, ToyAction action, double temperature) const;
    ToyAction greedy(TaskDomain domain) const;
    bool finite() const noexcept;

    friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;
};

struct ToolWorldTask {
    std::string id;
    TaskDomain domain = TaskDomain::OpenDomain;
    ActionProbs success_prob{};  // indexed by ToyAction

    void validate() const;  // throws InvalidConfig
};

/// Knowledge-intensive {0.9, 0.1, 0.1}, math {0.1, 0.9, 0.5}, open domain
/// {0.8, 0.8, 0.8}, in UseSearch/UseCode/NoTool order.
ActionProbs default_success_probs(TaskDomain domain);
std::vector<ToolWorldTask> default_training_tasks();
std::vector<ToolWorldTask> default_probe_tasks();

struct ToyTrajectory {
    ToyAction action = ToyAction::NoTool;
    bool correct = false;
    RewardBreakdown reward;
};

struct RolloutGroup {
    std::string prompt;  // task id
    TaskDomain domain = TaskDomain::OpenDomain;
    std::vector<ToyTrajectory> trajectories;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

/// Reward of one toy rollout: action reward for the invoked tool, output
/// reward 1 when correct and the floor otherwise.
RewardBreakdown toy_reward(TaskDomain domain, ToyAction action, bool correct, const RewardConfig& rcfg);

RolloutGroup sample_group(const ToolWorldTask& task, const ToyPolicy& policy, const GrpoConfig& cfg,
                          const RewardConfig& rcfg, std::uint64_t seed);

/// Decision units of one toy rollout: the action (trainable) followed by the
/// environment's result (masked) when a tool was called.
UnitLogProbs toy_units(const ToyTrajectory& t, TaskDomain domain, const ToyPolicy& policy, const ToyPolicy& old,
                       const ToyPolicy& ref, double temperature);

struct ToyObjective {
    double value = 0.0;
    std::array<std::array<double, kNumToyActions>, kNumDomains> grad{};  // d value / d logits
};

/// Mean over groups of the GRPO objective, with its gradient in logit space.
ToyObjective toy_objective(std::span<const RolloutGroup> groups, const ToyPolicy& policy, const ToyPolicy& old,
                           const ToyPolicy& ref, const GrpoConfig& cfg);

/// Expected reward under the policy, enumerating actions and outcomes.
double expected_reward(const ToyPolicy& policy, const ToolWorldTask& task, const RewardConfig& rcfg,
                       double temperature);
double optimal_expected_reward(const ToolWorldTask& task, const RewardConfig& rcfg);

/// Probability that a sampled action on a knowledge-intensive or math probe is
/// that domain's correct tool, averaged over such probes. A no-tool choice
/// counts as a miss.
double expected_probe_ts(const ToyPolicy& policy, std::span<const ToolWorldTask> probes, double temperature);
double greedy_probe_ts(const ToyPolicy& policy, std::span<const ToolWorldTask> probes);
double sampled_probe_ts(const ToyPolicy& policy, std::span<const ToolWorldTask> probes, double temperature,
                        std::size_t samples, std::uint64_t seed);

double total_variation(const ActionProbs& p, const ActionProbs& q);
/// Mean over domains of KL(policy || ref).
double kl_to_reference(const ToyPolicy& policy, const ToyPolicy& ref, double temperature);

struct CurvePoint {
    std::size_t update = 0;
    double mean_reward = 0.0;
    double mean_r_act = 0.0;
    double mean_r_out = 0.0;
    double ts_probe = 0.0;  // expected_probe_ts of the policy after the update
    double kl_to_ref = 0.0;
};

struct TrainOptions {
    GrpoConfig grpo;
    RewardConfig reward;
    std::vector<ToolWorldTask> tasks = default_training_tasks();
    std::vector<ToolWorldTask> probes = default_probe_tasks();
    std::size_t updates = 2000;
    std::uint64_t seed = 17;
    ToyPolicy initial;  // uniform
};

struct TrainResult {
    ToyPolicy policy;
    ToyPolicy reference;
    std::vector<CurvePoint> curve;
};

/// Each update snapshots the old policy, samples batch_size / group_size
/// groups spread round-robin over the tasks, then takes `epochs` gradient
/// ascent steps. The reference policy is the initial one. Throws
/// DivergenceDetected if a logit becomes non-finite.
TrainResult train_toy(const TrainOptions& options, const std::function<void(const CurvePoint&)>& on_update = {});

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

}  // namespace tir
