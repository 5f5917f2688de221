// SPDX-License-Identifier: Apache-2.0
//
// Run configuration, read from a JSON file. Relative paths resolve against
// the directory holding the file. Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "tir/grpo.hpp"
#include "tir/remote.hpp"
#include "tir/reward.hpp"
#include "tir/rollout.hpp"
#include "tir/search.hpp"
#include "tir/templates.hpp"
#include "tir/tool_env.hpp"
#include "tir/toolworld.hpp"

namespace tir {

enum class BackendKind { Scripted, Toy, Remote };

std::string_view to_string(BackendKind k) noexcept;
std::optional<BackendKind> parse_backend_kind(std::string_view name) noexcept;

struct RunConfig {
    // inputs; checked for existence at load
    std::filesystem::path corpus;
    std::filesystem::path index;
    std::filesystem::path tasks;
    std::filesystem::path scripts;
    std::filesystem::path tool_template;
    std::filesystem::path standalone_template;
    // outputs
    std::filesystem::path log;
    std::filesystem::path curve;

    ToolBudget tool_budget;
    std::size_t top_k = 3;
    Bm25Params bm25;
    CodeBackend code;

    RolloutBudget rollout_budget;
    PromptMode mode = PromptMode::ToolAssisted;
    std::size_t parallelism = 1;
    double temperature = 1.0;
    std::uint64_t seed = 0;

    BackendKind backend = BackendKind::Scripted;
    std::optional<RemoteConfig> remote;
    ToyPolicy toy_policy;  // uniform unless configured

    RewardConfig reward;
    GrpoConfig grpo;
    std::size_t train_updates = 2000;
    std::uint64_t train_seed = 17;

    /// Throws InvalidConfig when a component invariant fails.
    void validate() const;
};

/// Throws InvalidConfig.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace tir
