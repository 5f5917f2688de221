// SPDX-License-Identifier: Apache-2.0
#include "tir/toolworld.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "tir/error.hpp"

namespace tir {

namespace {

std::size_t idx(TaskDomain d) {
    return static_cast<std::size_t>(d);
}
std::size_t idx(ToyAction a) {
    return static_cast<std::size_t>(a);
}

constexpr TaskDomain kDomains[] = {TaskDomain::KnowledgeIntensive, TaskDomain::Math, TaskDomain::OpenDomain};
constexpr ToyAction kActions[] = {ToyAction::UseSearch, ToyAction::UseCode, ToyAction::NoTool};

}  // namespace

std::string_view to_string(ToyAction a) noexcept {
    switch (a) {
        case ToyAction::UseSearch: return "use_search";
        case ToyAction::UseCode: return "use_code";
        case ToyAction::NoTool: return "no_tool";
    }
    return "?";
}

std::set<ToolKind> invoked_tools(ToyAction a) {
    switch (a) {
        case ToyAction::UseSearch: return {ToolKind::Search};
        case ToyAction::UseCode: return {ToolKind::Code};
        case ToyAction::NoTool: return {};
    }
    return {};
}

std::optional<ToyAction> correct_action(TaskDomain domain) noexcept {
    switch (domain) {
        case TaskDomain::KnowledgeIntensive: return ToyAction::UseSearch;
        case TaskDomain::Math: return ToyAction::UseCode;
        case TaskDomain::OpenDomain: return std::nullopt;
    }
    return std::nullopt;
}

ActionProbs ToyPolicy::probabilities(TaskDomain domain, double temperature) const {
    const auto& z = logits[idx(domain)];
    const double top = *std::max_element(z.begin(), z.end()) / temperature;
    ActionProbs p{};
    double sum = 0.0;
    for (std::size_t a = 0; a < kNumToyActions; ++a) {
        p[a] = std::exp(z[a] / temperature - top);
        sum += p[a];
    }
    for (auto& x : p) x /= sum;
    return p;
}

double ToyPolicy::log_prob(TaskDomain domain, ToyAction action, double temperature) const {
    const auto& z = logits[idx(domain)];
    const double top = *std::max_element(z.begin(), z.end()) / temperature;
    double sum = 0.0;
    for (double v : z) sum += std::exp(v / temperature - top);
    return z[idx(action)] / temperature - top - std::log(sum);
}

ToyAction ToyPolicy::greedy(TaskDomain domain) const {
    const auto& z = logits[idx(domain)];
    return static_cast<ToyAction>(std::max_element(z.begin(), z.end()) - z.begin());
}

bool ToyPolicy::finite() const noexcept {
    for (const auto& row : logits) {
        for (double v : row) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

void ToolWorldTask::validate() const {
    for (double p : success_prob) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidConfig, "success probability outside [0, 1] in " + id);
    }
}

ActionProbs default_success_probs(TaskDomain domain) {
    switch (domain) {
        case TaskDomain::KnowledgeIntensive: return {0.9, 0.1, 0.1};
        case TaskDomain::Math: return {0.1, 0.9, 0.5};
        case TaskDomain::OpenDomain: return {0.8, 0.8, 0.8};
    }
    return {};
}

std::vector<ToolWorldTask> default_training_tasks() {
    std::vector<ToolWorldTask> out;
    for (auto d : kDomains) out.push_back({std::string(to_string(d)) + "-train", d, default_success_probs(d)});
    return out;
}

std::vector<ToolWorldTask> default_probe_tasks() {
    std::vector<ToolWorldTask> out;
    for (auto d : kDomains) out.push_back({std::string(to_string(d)) + "-probe", d, default_success_probs(d)});
    return out;
}

RewardBreakdown toy_reward(TaskDomain domain, ToyAction action, bool correct, const RewardConfig& rcfg) {
    RewardBreakdown r;
    r.invoked = invoked_tools(action);
    r.formatted = true;
    r.r_act = action_reward(domain, r.invoked, rcfg);
    r.r_out = correct ? 1.0 : rcfg.r_out_floor;
    r.r = total_reward(r.r_act, r.r_out, rcfg);
    return r;
}

RolloutGroup sample_group(const ToolWorldTask& task, const ToyPolicy& policy, const GrpoConfig& cfg,
                          const RewardConfig& rcfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto probs = policy.probabilities(task.domain, cfg.temperature);
    RolloutGroup g;
    g.prompt = task.id;
    g.domain = task.domain;
    for (std::size_t i = 0; i < cfg.group_size; ++i) {
        const double u = unit(rng);
        std::size_t a = 0;
        double acc = probs[0];
        while (a + 1 < kNumToyActions && u >= acc) acc += probs[++a];
        const auto action = static_cast<ToyAction>(a);
        const bool correct = unit(rng) < task.success_prob[a];
        ToyTrajectory t{action, correct, toy_reward(task.domain, action, correct, rcfg)};
        g.rewards.push_back(t.reward.r);
        g.trajectories.push_back(std::move(t));
    }
    g.advantages = compute_advantages(g.rewards);
    return g;
}

UnitLogProbs toy_units(const ToyTrajectory& t, TaskDomain domain, const ToyPolicy& policy, const ToyPolicy& old,
                       const ToyPolicy& ref, double temperature) {
    UnitLogProbs u;
    u.logp_new.push_back(policy.log_prob(domain, t.action, temperature));
    u.logp_old.push_back(old.log_prob(domain, t.action, temperature));
    u.logp_ref.push_back(ref.log_prob(domain, t.action, temperature));
    u.masked.push_back(false);
    if (t.action != ToyAction::NoTool) {
        // tool output is produced by the environment, not the policy
        u.logp_new.push_back(0.0);
        u.logp_old.push_back(0.0);
        u.logp_ref.push_back(0.0);
        u.masked.push_back(true);
    }
    return u;
}

ToyObjective toy_objective(std::span<const RolloutGroup> groups, const ToyPolicy& policy, const ToyPolicy& old,
                           const ToyPolicy& ref, const GrpoConfig& cfg) {
    ToyObjective out;
    if (groups.empty()) return out;
    const double T = cfg.temperature;
    const double per_group = 1.0 / static_cast<double>(groups.size());
    for (const auto& g : groups) {
        std::vector<UnitLogProbs> units;
        units.reserve(g.trajectories.size());
        for (const auto& t : g.trajectories) units.push_back(toy_units(t, g.domain, policy, old, ref, T));
        const auto obj = grpo_objective(g.advantages, units, cfg);
        out.value += per_group * obj.value;
        const auto p = policy.probabilities(g.domain, T);
        auto& row = out.grad[idx(g.domain)];
        for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
            const double dlogp = obj.grad_logp_new[i][0];
            const auto a = idx(g.trajectories[i].action);
            for (std::size_t b = 0; b < kNumToyActions; ++b) {
                row[b] += per_group * dlogp * ((a == b ? 1.0 : 0.0) - p[b]) / T;
            }
        }
    }
    return out;
}

double expected_reward(const ToyPolicy& policy, const ToolWorldTask& task, const RewardConfig& rcfg,
                       double temperature) {
    const auto p = policy.probabilities(task.domain, temperature);
    double e = 0.0;
    for (auto a : kActions) {
        const double s = task.success_prob[idx(a)];
        e += p[idx(a)] * (s * toy_reward(task.domain, a, true, rcfg).r + (1.0 - s) * toy_reward(task.domain, a, false, rcfg).r);
    }
    return e;
}

double optimal_expected_reward(const ToolWorldTask& task, const RewardConfig& rcfg) {
    double best = -1e300;
    for (auto a : kActions) {
        const double s = task.success_prob[idx(a)];
        best = std::max(best, s * toy_reward(task.domain, a, true, rcfg).r +
                                  (1.0 - s) * toy_reward(task.domain, a, false, rcfg).r);
    }
    return best;
}

double expected_probe_ts(const ToyPolicy& policy, std::span<const ToolWorldTask> probes, double temperature) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : probes) {
        const auto want = correct_action(t.domain);
        if (!want) continue;
        sum += policy.probabilities(t.domain, temperature)[idx(*want)];
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double greedy_probe_ts(const ToyPolicy& policy, std::span<const ToolWorldTask> probes) {
    std::size_t hit = 0, n = 0;
    for (const auto& t : probes) {
        const auto want = correct_action(t.domain);
        if (!want) continue;
        hit += policy.greedy(t.domain) == *want ? 1 : 0;
        ++n;
    }
    return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
}

double sampled_probe_ts(const ToyPolicy& policy, std::span<const ToolWorldTask> probes, double temperature,
                        std::size_t samples, std::uint64_t seed) {
    std::vector<const ToolWorldTask*> eligible;
    for (const auto& t : probes) {
        if (correct_action(t.domain)) eligible.push_back(&t);
    }
    if (eligible.empty() || samples == 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const auto& t = *eligible[i % eligible.size()];
        const auto p = policy.probabilities(t.domain, temperature);
        const double u = unit(rng);
        std::size_t a = 0;
        double acc = p[0];
        while (a + 1 < kNumToyActions && u >= acc) acc += p[++a];
        hit += static_cast<ToyAction>(a) == *correct_action(t.domain) ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(samples);
}

double total_variation(const ActionProbs& p, const ActionProbs& q) {
    double s = 0.0;
    for (std::size_t a = 0; a < kNumToyActions; ++a) s += std::fabs(p[a] - q[a]);
    return 0.5 * s;
}

double kl_to_reference(const ToyPolicy& policy, const ToyPolicy& ref, double temperature) {
    double total = 0.0;
    for (auto d : kDomains) {
        const auto p = policy.probabilities(d, temperature);
        const auto q = ref.probabilities(d, temperature);
        for (std::size_t a = 0; a < kNumToyActions; ++a) {
            if (p[a] > 0.0) total += p[a] * std::log(p[a] / q[a]);
        }
    }
    return total / static_cast<double>(kNumDomains);
}

TrainResult train_toy(const TrainOptions& options, const std::function<void(const CurvePoint&)>& on_update) {
    const auto& cfg = options.grpo;
    cfg.validate();
    options.reward.validate();
    for (auto d : kDomains) {
        if (std::none_of(options.tasks.begin(), options.tasks.end(), [&](const auto& t) { return t.domain == d; })) {
            throw Error(ErrorCode::InvalidConfig, "no training task for domain " + std::string(to_string(d)));
        }
    }
    for (const auto& t : options.tasks) t.validate();
    for (const auto& t : options.probes) t.validate();

    TrainResult result;
    result.policy = options.initial;
    result.reference = options.initial;
    if (!result.policy.finite()) throw Error(ErrorCode::DivergenceDetected, "initial logits are not finite");
    const std::size_t groups_per_update = std::max<std::size_t>(1, cfg.batch_size / cfg.group_size);
    result.curve.reserve(options.updates);

    for (std::size_t u = 0; u < options.updates; ++u) {
        const ToyPolicy old = result.policy;
        std::vector<RolloutGroup> groups;
        groups.reserve(groups_per_update);
        for (std::size_t g = 0; g < groups_per_update; ++g) {
            const auto& task = options.tasks[g % options.tasks.size()];
            groups.push_back(sample_group(task, old, cfg, options.reward, derive_seed(options.seed, u, g)));
        }
        for (std::size_t e = 0; e < cfg.epochs; ++e) {
            const auto obj = toy_objective(groups, result.policy, old, result.reference, cfg);
            for (std::size_t d = 0; d < kNumDomains; ++d) {
                for (std::size_t a = 0; a < kNumToyActions; ++a) {
                    result.policy.logits[d][a] += cfg.learning_rate * obj.grad[d][a];
                }
            }
            if (!result.policy.finite()) {
                throw Error(ErrorCode::DivergenceDetected, "non-finite logits at update " + std::to_string(u));
            }
        }

        CurvePoint pt;
        pt.update = u + 1;
        std::size_t n = 0;
        for (const auto& g : groups) {
            for (const auto& t : g.trajectories) {
                pt.mean_reward += t.reward.r;
                pt.mean_r_act += t.reward.r_act;
                pt.mean_r_out += t.reward.r_out;
                ++n;
            }
        }
        pt.mean_reward /= static_cast<double>(n);
        pt.mean_r_act /= static_cast<double>(n);
        pt.mean_r_out /= static_cast<double>(n);
        pt.ts_probe = expected_probe_ts(result.policy, options.probes, cfg.temperature);
        pt.kl_to_ref = kl_to_reference(result.policy, result.reference, cfg.temperature);
        result.curve.push_back(pt);
        if (on_update) on_update(pt);
    }
    return result;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
    out << "update,mean_reward,mean_r_act,mean_r_out,ts_probe,kl_to_ref\n";
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(10);
    for (const auto& p : curve) {
        out << p.update << ',' << p.mean_reward << ',' << p.mean_r_act << ',' << p.mean_r_out << ',' << p.ts_probe << ','
            << p.kl_to_ref << '\n';
    }
    out.flags(flags);
    out.precision(prec);
}

}  // namespace tir
