// SPDX-License-Identifier: Apache-2.0
#include "tir/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tir/error.hpp"

namespace tir {

void GrpoConfig::validate() const {
    if (group_size < 2) throw Error(ErrorCode::InvalidConfig, "group_size must be at least 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw Error(ErrorCode::InvalidConfig, "clip_epsilon must be in (0, 1)");
    if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) throw Error(ErrorCode::InvalidConfig, "kl_beta must be >= 0");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorCode::InvalidConfig, "learning_rate must be >= 0");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw Error(ErrorCode::InvalidConfig, "temperature must be > 0");
    if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
    if (epochs == 0) throw Error(ErrorCode::InvalidConfig, "epochs must be positive");
}

std::vector<double> compute_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2) {
        throw Error(ErrorCode::GroupTooSmall, "group of " + std::to_string(rewards.size()) + " rewards");
    }
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;
    const double denom = std::max(std::sqrt(var), kAdvantageStdFloor);
    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) {
        // exact zeros for a degenerate group
        out.push_back(var == 0.0 ? 0.0 : (r - mean) / denom);
    }
    return out;
}

double kl_approx(double logp_ref, double logp_new) {
    const double d = logp_ref - logp_new;
    return std::exp(d) - d - 1.0;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate_grad(double logp_new, double logp_old, double advantage, double epsilon) {
    const double ratio = std::exp(logp_new - logp_old);
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    if (ratio == clipped || ratio * advantage <= clipped * advantage) return advantage * ratio;
    return 0.0;
}

ObjectiveValue grpo_objective(std::span<const double> advantages, std::span<const UnitLogProbs> units,
                              const GrpoConfig& cfg) {
    if (advantages.size() != units.size()) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(advantages.size()) + " advantages for " +
                                                  std::to_string(units.size()) + " trajectories");
    }
    ObjectiveValue out;
    out.grad_logp_new.resize(units.size());
    if (units.empty()) return out;
    const double group_weight = 1.0 / static_cast<double>(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& u = units[i];
        const std::size_t n = u.logp_new.size();
        if (u.logp_old.size() != n || u.logp_ref.size() != n || u.masked.size() != n) {
            throw Error(ErrorCode::ShapeMismatch, "trajectory " + std::to_string(i) + " has misaligned unit arrays");
        }
        auto& grad = out.grad_logp_new[i];
        grad.assign(n, 0.0);
        const auto active = static_cast<std::size_t>(std::count(u.masked.begin(), u.masked.end(), false));
        if (active == 0) continue;
        const double w = group_weight / static_cast<double>(active);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (u.masked[k]) continue;
            const double ratio = std::exp(u.logp_new[k] - u.logp_old[k]);
            sum += clipped_surrogate(ratio, advantages[i], cfg.clip_epsilon) -
                   cfg.kl_beta * kl_approx(u.logp_ref[k], u.logp_new[k]);
            const double rho = std::exp(u.logp_ref[k] - u.logp_new[k]);
            grad[k] = w * (clipped_surrogate_grad(u.logp_new[k], u.logp_old[k], advantages[i], cfg.clip_epsilon) +
                           cfg.kl_beta * (rho - 1.0));
        }
        out.value += w * sum;
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

}  // namespace tir
