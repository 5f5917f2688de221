// SPDX-License-Identifier: Apache-2.0
//
// Group-relative policy optimisation: advantages, clipped surrogate, KL
// penalty and the objective over per-unit log-probabilities.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tir {

struct GrpoConfig {
    std::size_t group_size = 5;
    double clip_epsilon = 0.2;
    double kl_beta = 0.001;
    double learning_rate = 0.1;
    double temperature = 1.0;
    std::size_t batch_size = 256;  // trajectories sampled per update
    std::size_t epochs = 2;        // ascent steps per sampled batch

    /// Throws InvalidConfig.
    void validate() const;
};

inline constexpr double kAdvantageStdFloor = 1e-8;

/// (r_i - mean) / max(population std, 1e-8). Throws GroupTooSmall below two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards);

/// rho - log(rho) - 1 with rho = exp(logp_ref - logp_new).
double kl_approx(double logp_ref, double logp_new);

double clipped_surrogate(double ratio, double advantage, double epsilon);

/// Derivative of clipped_surrogate(exp(logp_new - logp_old), A, eps) with
/// respect to logp_new. Zero when the clipped branch is the active minimum.
double clipped_surrogate_grad(double logp_new, double logp_old, double advantage, double epsilon);

/// Per-unit log-probabilities of one trajectory. masked[k] excludes unit k.
struct UnitLogProbs {
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;
    std::vector<bool> masked;
};

struct ObjectiveValue {
    double value = 0.0;
    /// d value / d logp_new, same shape as the inputs; zero at masked units.
    std::vector<std::vector<double>> grad_logp_new;
};

/// Mean over the group of each trajectory's mean over unmasked units of
/// clipped_surrogate - beta * kl_approx. A trajectory without unmasked units
/// contributes zero. Throws ShapeMismatch on misaligned inputs.
ObjectiveValue grpo_objective(std::span<const double> advantages, std::span<const UnitLogProbs> units,
                              const GrpoConfig& cfg);

/// SplitMix64 step; used to derive independent generator seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace tir
