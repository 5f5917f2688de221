// SPDX-License-Identifier: Apache-2.0
//
// Hybrid reward: action reward over the set of invoked tools, output reward
// behind a format gate, and their weighted sum.

#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tir/constraints.hpp"
#include "tir/protocol.hpp"

namespace tir {

struct RewardConfig {
    double w_act = 0.1;
    double w_out = 0.9;
    double r_penalty = -1.0;
    double r_out_floor = 0.1;

    /// Throws InvalidConfig unless w_act + w_out == 1 (within 1e-12),
    /// r_penalty < 0 and 0 < r_out_floor < 1.
    void validate() const;
};

struct RewardBreakdown {
    double r_act = 0.0;
    double r_out = 0.0;
    double r = 0.0;
    bool formatted = false;
    std::set<ToolKind> invoked;
};

/// Which evaluator scores the final answer.
enum class GroundTruthKind { Qa, Math, Instruction, OpenQa };

std::string_view to_string(GroundTruthKind kind) noexcept;  // "qa", "math", "if", "open_qa"
std::optional<GroundTruthKind> parse_ground_truth_kind(std::string_view name) noexcept;

struct GroundTruth {
    GroundTruthKind kind = GroundTruthKind::Qa;
    std::vector<std::string> answers;                // any match counts; best score wins
    std::vector<InstructionConstraint> constraints;  // Instruction only, never empty

    static GroundTruth qa(std::vector<std::string> answers);
    static GroundTruth math(std::string answer);
    static GroundTruth open_qa(std::vector<std::string> answers);
    /// Throws InvalidConstraint when the list is empty or a constraint is invalid.
    static GroundTruth instruction(std::vector<InstructionConstraint> constraints);
};

/// Reads {"gt_kind": ..., "answer": string | [strings]} or
/// {"gt_kind": "if", "constraints": [...]}. Throws MalformedTask.
GroundTruth ground_truth_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruth& gt);

/// Throws EvaluatorMismatch unless the evaluator suits the domain:
/// knowledge-intensive takes qa, math takes math, open domain takes if or open_qa.
void check_evaluator(TaskDomain domain, GroundTruthKind kind);

double action_reward(TaskDomain domain, const std::set<ToolKind>& invoked, const RewardConfig& cfg);

/// Lowercase, drop ASCII punctuation and the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);
double f1_score(std::string_view pred, std::string_view gt);
int exact_match(std::string_view pred, std::string_view gt);
int math_equal(std::string_view pred, std::string_view gt);

/// f_eva for one prediction; the best over all reference answers.
double evaluate_answer(const GroundTruth& gt, std::string_view pred);

/// Strict parse of the rendered trajectory succeeds, the transcript ends in
/// an answer segment, and exactly one \boxed{...} appears outside tool
/// payloads and results.
bool is_formatted(const Trajectory& trajectory);

struct OutputReward {
    double r_out = 0.0;
    bool formatted = false;
};

OutputReward output_reward(const Trajectory& trajectory, const GroundTruth& gt, const RewardConfig& cfg);

double total_reward(double r_act, double r_out, const RewardConfig& cfg);

/// Full breakdown. force_unformatted zeroes the output reward, used for
/// rollouts that ran out of budget.
RewardBreakdown score_trajectory(const Trajectory& trajectory, const GroundTruth& gt, const RewardConfig& cfg,
                                 bool force_unformatted = false);

nlohmann::json to_json(const RewardBreakdown& r);

}  // namespace tir
