// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, wall time included.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bm25_oracle.hpp"
#include "episode_gen.hpp"
#include "interpreter_cases.hpp"
#include "mock_server.hpp"
#include "tir/cli.hpp"
#include "tir/config.hpp"
#include "tir/error.hpp"
#include "tir/grpo.hpp"
#include "tir/interpreter.hpp"
#include "tir/metrics.hpp"
#include "tir/protocol.hpp"
#include "tir/remote.hpp"
#include "tir/reward.hpp"
#include "tir/rollout.hpp"
#include "tir/search.hpp"
#include "tir/tasks.hpp"
#include "tir/toolworld.hpp"
#include "transcript_gen.hpp"

using namespace tir;

namespace {

const std::filesystem::path kFixtures = TIR_FIXTURES_DIR;

class Checker {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (ok) return;
        ++failures_;
        if (first_.empty()) first_ = what;
    }
    void near(double got, double want, double tol, const std::string& what) {
        char buf[128];
        std::snprintf(buf, sizeof buf, " (got %.17g, want %.17g)", got, want);
        expect(std::fabs(got - want) <= tol, what + buf);
    }
    bool ok() const { return failures_ == 0; }
    std::size_t checks() const { return checks_; }
    std::string summary() const {
        if (ok()) return std::to_string(checks_) + " checks";
        return std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed; first: " + first_;
    }
    std::string note;

private:
    std::size_t checks_ = 0;
    std::size_t failures_ = 0;
    std::string first_;
};

struct Criterion {
    const char* id;
    const char* title;
    double limit_seconds;
    std::function<void(Checker&)> body;
};

// --------------------------------------------------------------------------
// AC1 reward formula fixtures

struct RewardCase {
    TaskDomain domain;
    std::vector<ToolKind> calls;
    std::string prediction;
    GroundTruth gt;
    bool formatted;
    double r_act, r_out, r;
};

std::string build_transcript(const RewardCase& c) {
    std::string raw = "<think>working</think>";
    for (auto t : c.calls) {
        raw += std::string(tags::open_tag(t)) + "q" + std::string(tags::close_tag(t)) + "<result>obs</result>";
    }
    // unformatted answers leave the box off, so the text ends as bare prose
    raw += c.formatted ? "\\boxed{" + c.prediction + "}" : c.prediction;
    return raw;
}

void ac1(Checker& c) {
    using C = InstructionConstraint;
    constexpr auto KI = TaskDomain::KnowledgeIntensive;
    constexpr auto MA = TaskDomain::Math;
    constexpr auto OD = TaskDomain::OpenDomain;
    constexpr auto S = ToolKind::Search;
    constexpr auto K = ToolKind::Code;
    const auto done3 = std::vector{C::max_words(3), C::ends_with("done")};
    // r = 0.1 r_act + 0.9 r_out, values worked by hand
    const std::vector<RewardCase> cases = {
        {KI, {S}, "Paris", GroundTruth::qa({"Paris"}), true, 1, 1, 1.0},
        {KI, {S}, "big cat", GroundTruth::qa({"big dog"}), true, 1, 0.5, 0.55},
        {KI, {S}, "Berlin", GroundTruth::qa({"Paris"}), true, 1, 0.1, 0.19},
        {KI, {}, "Paris", GroundTruth::qa({"Paris"}), true, 0, 1, 0.9},
        {KI, {K}, "Paris", GroundTruth::qa({"Paris"}), true, -1, 1, 0.8},
        {KI, {S, K}, "Paris", GroundTruth::qa({"Paris"}), true, -1, 1, 0.8},
        {KI, {S}, "Paris", GroundTruth::qa({"Paris"}), false, 1, 0, 0.1},
        {KI, {S, S, S}, "paris.", GroundTruth::qa({"Paris"}), true, 1, 1, 1.0},
        {KI, {S}, "Paris", GroundTruth::qa({"Lyon", "Paris"}), true, 1, 1, 1.0},
        {KI, {K}, "Berlin", GroundTruth::qa({"Paris"}), true, -1, 0.1, -0.01},
        {MA, {K}, "391", GroundTruth::math("391"), true, 1, 1, 1.0},
        {MA, {S}, "391", GroundTruth::math("391"), true, -1, 1, 0.8},
        {MA, {}, "7", GroundTruth::math("7"), true, 0, 1, 0.9},
        {MA, {K}, "0.5", GroundTruth::math("1/2"), true, 1, 1, 1.0},
        {MA, {K, K}, "1,000", GroundTruth::math("1000"), true, 1, 1, 1.0},
        {MA, {K}, "3", GroundTruth::math("4"), true, 1, 0.1, 0.19},
        {MA, {S}, "4", GroundTruth::math("4"), false, -1, 0, -0.1},
        {MA, {}, "4", GroundTruth::math("4"), false, 0, 0, 0.0},
        {OD, {S}, "Mars", GroundTruth::open_qa({"Mars"}), true, 1, 1, 1.0},
        {OD, {K}, "Venus", GroundTruth::open_qa({"Mars"}), true, 1, 0.1, 0.19},
        {OD, {}, "the Mars", GroundTruth::open_qa({"Mars"}), true, 1, 1, 1.0},
        {OD, {}, "All done", GroundTruth::instruction(done3), true, 1, 1, 1.0},
        {OD, {}, "All tasks are done", GroundTruth::instruction(done3), true, 1, 0.1, 0.19},
        {OD, {S, K}, "x", GroundTruth::instruction({C::min_words(1)}), false, 1, 0, 0.1},
    };
    const RewardConfig cfg;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& k = cases[i];
        const auto raw = build_transcript(k);
        const auto traj = make_trajectory("q", k.domain, parse_transcript(raw, ParseMode::Lenient));
        const auto r = score_trajectory(traj, k.gt, cfg);
        const auto tag = "case " + std::to_string(i + 1);
        c.near(r.r_act, k.r_act, 1e-12, tag + " r_act");
        c.near(r.r_out, k.r_out, 1e-12, tag + " r_out");
        c.near(r.r, k.r, 1e-12, tag + " r");
        c.expect(r.formatted == k.formatted, tag + " formatted");
    }
    c.expect(cases.size() >= 20, "at least 20 fixtures");
    c.note = std::to_string(cases.size()) + " fixtures";
}

// --------------------------------------------------------------------------
// AC2 metric fixtures and randomized logs

EpisodeRecord record(TaskDomain d, std::vector<ToolKind> calls, bool correct) {
    EpisodeRecord r;
    r.domain = d;
    r.invocations = std::move(calls);
    r.correct = correct;
    r.gt = d == TaskDomain::Math ? GroundTruth::math("1") : GroundTruth::qa({"x"});
    return r;
}

void ac2(Checker& c) {
    constexpr auto S = ToolKind::Search;
    constexpr auto K = ToolKind::Code;
    const std::vector math{record(TaskDomain::Math, {K}, true), record(TaskDomain::Math, {K, S}, false)};
    c.near(tool_selection(math).value_or(-1), 2.0 / 3.0, 1e-12, "TS [Code, Code, Search]");
    const std::vector five{record(TaskDomain::Math, {K, K}, true), record(TaskDomain::Math, {K}, true),
                           record(TaskDomain::KnowledgeIntensive, {S}, true),
                           record(TaskDomain::KnowledgeIntensive, {}, false),
                           record(TaskDomain::KnowledgeIntensive, {}, false)};
    c.near(tool_productivity(five).value_or(-1), 0.6, 1e-12, "TP 3 correct / (1 + 4)");

    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = testing::random_log(rng, 25);
        const auto b = testing::random_log(rng, 25);
        auto both = a;
        both.insert(both.end(), b.begin(), b.end());

        // oracle: count hits over the pooled invocation multiset
        std::size_t hits = 0, total = 0, correct = 0, calls = 0;
        for (const auto& r : both) {
            correct += r.correct;
            calls += r.invocations.size();
            if (r.domain == TaskDomain::OpenDomain || r.mixed_tools) continue;
            const auto want = r.domain == TaskDomain::Math ? K : S;
            for (auto t : r.invocations) {
                hits += t == want;
                ++total;
            }
        }
        const auto ts = tool_selection(both);
        c.expect(ts.has_value() == (total > 0), "TS presence");
        if (ts && total > 0) c.near(*ts, static_cast<double>(hits) / static_cast<double>(total), 1e-12, "pooled TS");
        if (!both.empty()) {
            c.near(*tool_productivity(both), static_cast<double>(correct) / static_cast<double>(1 + calls), 1e-12,
                   "TP oracle");
        }

        auto shuffled = both;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto x = build_report(both).overall;
        const auto y = build_report(shuffled).overall;
        c.expect(x.episodes == y.episodes && x.correct == y.correct && x.invocations == y.invocations,
                 "permutation: counts");
        c.expect(x.ts == y.ts && x.tp == y.tp && x.em == y.em, "permutation: TS/TP/EM");
        if (x.f1) c.near(*y.f1, *x.f1, 1e-12, "permutation: F1");
        if (x.sacc) c.near(*y.sacc, *x.sacc, 1e-12, "permutation: SAcc");
    }
    c.note = "1000 randomized logs";
}

// --------------------------------------------------------------------------
// AC3 GRPO math

ToyPolicy random_policy(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    ToyPolicy p;
    for (auto& row : p.logits) {
        for (auto& v : row) v = n(rng);
    }
    return p;
}

void ac3(Checker& c) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t g = 2 + rng() % 15;
        std::vector<double> rewards(g);
        for (auto& r : rewards) r = u(rng);
        if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) continue;
        const auto a = compute_advantages(rewards);
        double mean = 0, var = 0;
        for (double x : a) mean += x;
        mean /= static_cast<double>(g);
        for (double x : a) var += (x - mean) * (x - mean);
        var /= static_cast<double>(g);
        c.near(mean, 0.0, 1e-9, "advantage mean");
        c.near(var, 1.0, 1e-9, "advantage variance");
    }
    std::uniform_real_distribution<double> lp(-8.0, 0.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const double x = lp(rng);
        const double y = trial % 4 == 0 ? x : lp(rng);
        const double k = kl_approx(x, y);
        c.expect(k >= 0.0, "kl_approx >= 0");
        c.expect((k == 0.0) == (x == y), "kl_approx zero iff equal");
    }
    std::uniform_real_distribution<double> ratio(0.0, 3.0), adv(-2.0, 2.0), eps(0.01, 0.5);
    for (int trial = 0; trial < 10000; ++trial) {
        const double r = ratio(rng), a = adv(rng), e = eps(rng);
        const double clipped = r < 1 - e ? 1 - e : (r > 1 + e ? 1 + e : r);
        const double brute = std::min(r * a, clipped * a);
        c.expect(clipped_surrogate(r, a, e) == brute, "clipped surrogate");
    }

    const RewardConfig rcfg;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        GrpoConfig cfg;
        cfg.kl_beta = trial % 2 ? 0.001 : 0.7;
        cfg.temperature = trial % 3 == 0 ? 0.7 : 1.0;
        const ToyPolicy old = random_policy(rng, 1.0);
        ToyPolicy cur = old;
        std::normal_distribution<double> step(0.0, 0.1);
        for (auto& row : cur.logits) {
            for (auto& v : row) v += step(rng);
        }
        const ToyPolicy ref = random_policy(rng, 0.5);
        std::vector<RolloutGroup> groups;
        for (const auto& task : default_training_tasks()) groups.push_back(sample_group(task, old, cfg, rcfg, rng()));
        const auto obj = toy_objective(groups, cur, old, ref, cfg);
        double diff = 0.0, norm = 0.0;
        for (std::size_t d = 0; d < kNumDomains; ++d) {
            for (std::size_t a = 0; a < kNumToyActions; ++a) {
                const double h = 1e-6;
                ToyPolicy up = cur, down = cur;
                up.logits[d][a] += h;
                down.logits[d][a] -= h;
                const double fd =
                    (toy_objective(groups, up, old, ref, cfg).value - toy_objective(groups, down, old, ref, cfg).value) /
                    (2 * h);
                diff += (fd - obj.grad[d][a]) * (fd - obj.grad[d][a]);
                norm += fd * fd;
            }
        }
        // relative error of the whole gradient; an all-zero gradient must match exactly
        const double rel = norm > 0 ? std::sqrt(diff / norm) : std::sqrt(diff);
        worst = std::max(worst, rel);
        c.expect(rel <= 1e-5, "finite-difference gradient, trial " + std::to_string(trial));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "worst gradient relative error %.2e", worst);
    c.note = buf;
}

// --------------------------------------------------------------------------
// AC4 ToolWorld reproduction

// Optimal per-domain expectation under the default success table:
// knowledge: search 0.1 + 0.9 (0.9 + 0.1 * 0.1) = 0.919
// math:      code   0.1 + 0.9 (0.9 + 0.1 * 0.1) = 0.919
// open:      any    0.1 + 0.9 (0.8 + 0.2 * 0.1) = 0.838
double action_value(TaskDomain d, ToyAction a) {
    static const double table[3][3] = {
        {0.919, -0.1 + 0.9 * (0.1 + 0.9 * 0.1), 0.9 * (0.1 + 0.9 * 0.1)},
        {-0.1 + 0.9 * (0.1 + 0.9 * 0.1), 0.919, 0.9 * (0.5 + 0.5 * 0.1)},
        {0.838, 0.838, 0.838},
    };
    return table[static_cast<int>(d)][static_cast<int>(a)];
}

void ac4(Checker& c) {
    std::string csv, err;
    const char* argv[] = {"tir", "train-toy", "--seed", "17", "--updates", "2000"};
    std::ostringstream out, diag;
    const int code = cli_main(6, argv, out, diag);
    c.expect(code == kExitOk, "train-toy exit status");
    csv = out.str();
    std::istringstream lines(csv);
    std::string line, last;
    std::size_t rows = 0;
    std::getline(lines, line);
    c.expect(line == "update,mean_reward,mean_r_act,mean_r_out,ts_probe,kl_to_ref", "CSV header");
    while (std::getline(lines, line)) {
        if (!line.empty()) {
            last = line;
            ++rows;
        }
    }
    c.expect(rows == 2000, "CSV has 2000 rows");
    std::vector<double> fields;
    std::stringstream ls(last);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(std::stod(f));
    const double csv_ts = fields.size() == 6 ? fields[4] : 0.0;
    c.expect(csv_ts >= 0.95, "final ts_probe >= 0.95");

    TrainOptions opt;
    opt.seed = 17;
    opt.updates = 2000;
    const auto trained = train_toy(opt);
    c.near(trained.curve.back().ts_probe, csv_ts, 1e-9, "library run matches CLI");

    double gap = 0.0, optimum = 0.0;
    for (const auto& t : opt.probes) {
        double expected = 0.0;
        const auto p = trained.policy.probabilities(t.domain, 1.0);
        for (std::size_t a = 0; a < kNumToyActions; ++a) expected += p[a] * action_value(t.domain, ToyAction(a));
        double best = -1.0;
        for (std::size_t a = 0; a < kNumToyActions; ++a) best = std::max(best, action_value(t.domain, ToyAction(a)));
        c.near(optimal_expected_reward(t, opt.reward), best, 1e-12, "library optimum equals hand enumeration");
        c.near(expected_reward(trained.policy, t, opt.reward, 1.0), expected, 1e-12, "expected reward oracle");
        gap += expected - best;
        optimum += best;
    }
    gap /= static_cast<double>(opt.probes.size());
    optimum /= static_cast<double>(opt.probes.size());
    c.expect(std::fabs(gap) <= 0.02, "mean reward within 0.02 of optimum");

    const ToyPolicy uniform;
    const double uniform_ts = sampled_probe_ts(uniform, opt.probes, 1.0, 10000, 11);
    c.near(uniform_ts, 1.0 / 3.0, 0.05, "uniform sampled TS");

    TrainOptions anchored = opt;
    anchored.grpo.kl_beta = 10.0;
    const auto held = train_toy(anchored);
    double worst_tv = 0.0;
    for (auto d : {TaskDomain::KnowledgeIntensive, TaskDomain::Math, TaskDomain::OpenDomain}) {
        const double tv = total_variation(held.policy.probabilities(d, 1.0), held.reference.probabilities(d, 1.0));
        worst_tv = std::max(worst_tv, tv);
        c.expect(tv < 0.05, "beta=10 total variation < 0.05");
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "ts_probe %.4f, reward %.4f vs optimum %.4f, uniform TS %.4f, beta=10 TV %.4f",
                  csv_ts, optimum + gap, optimum, uniform_ts, worst_tv);
    c.note = buf;
}

// --------------------------------------------------------------------------
// AC5 protocol robustness

bool tiles(const std::vector<MaskSpan>& spans, const std::vector<Segment>& segs, std::size_t len) {
    std::size_t at = 0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (spans[i].begin != at || spans[i].end <= spans[i].begin) return false;
        if (i > 0 && spans[i - 1].masked == spans[i].masked) return false;
        at = spans[i].end;
    }
    if (at != len) return false;
    // masked bytes are exactly the rendered tool results
    std::size_t masked = 0, results = 0;
    for (const auto& s : spans) masked += s.masked ? s.end - s.begin : 0;
    for (const auto& s : segs) results += s.kind.type == SegmentType::ToolResult ? render(s).size() : 0;
    return masked == results;
}

void ac5(Checker& c) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100000; ++i) {
        const auto raw = testing::random_valid_transcript(rng);
        try {
            const auto segs = parse_transcript(raw, ParseMode::Strict);
            c.expect(render(segs) == raw, "strict round trip");
            const auto traj = make_trajectory("q", TaskDomain::Math, segs);
            c.expect(tiles(build_loss_mask(traj), segs, raw.size()), "mask tiling (valid)");
        } catch (const Error& e) {
            c.expect(false, std::string("strict parse rejected a valid transcript: ") + e.what());
        }
    }
    static const char* fragments[] = {"<think>", "</think>", "<search>", "</search>", "<code>", "</code>",
                                      "<result>", "</result>", "\\boxed{", "}", "{", "<", ">", "</", "<thin"};
    for (int i = 0; i < 1000000; ++i) {
        std::string raw;
        const auto n = rng() % 24;
        for (std::size_t j = 0; j < n; ++j) {
            if (rng() % 3 == 0) {
                raw += fragments[rng() % std::size(fragments)];
            } else {
                raw.push_back(static_cast<char>(rng() & 0xff));
            }
        }
        try {
            const auto segs = parse_transcript(raw, ParseMode::Lenient);
            c.expect(render(segs) == raw, "lenient parse keeps bytes");
            if (i % 10 == 0) {
                const auto traj = make_trajectory("q", TaskDomain::Math, segs);
                c.expect(tiles(build_loss_mask(traj), segs, raw.size()), "mask tiling (lenient)");
            }
        } catch (...) {
            c.expect(false, "lenient parser threw");
        }
    }
    c.note = "1e5 round trips, 1e6 random byte strings";
}

// --------------------------------------------------------------------------
// AC6 tool environment oracles

void ac6(Checker& c) {
    std::mt19937_64 rng(6);
    std::size_t queries = 0;
    for (int round = 0; round < 100; ++round) {
        const auto docs = testing::random_corpus(rng, 1 + rng() % 100);
        const SearchIndex index(docs);
        const auto nq = 1 + rng() % 50;
        for (std::size_t q = 0; q < nq; ++q, ++queries) {
            const auto query = testing::random_query(rng);
            const std::size_t k = 1 + rng() % 10;
            const auto hits = index.search(query, k);
            const auto want = testing::oracle_rank(docs, query, k);
            c.expect(hits.size() == want.size(), "hit count");
            for (std::size_t i = 0; i < std::min(hits.size(), want.size()); ++i) {
                c.expect(hits[i].doc_id == want[i].first, "ranking");
                c.near(hits[i].score, want[i].second, 1e-9, "BM25 score");
            }
        }
    }
    std::size_t programs = 0;
    for (const auto& p : testing::kInterpreterCases) {
        const auto r = run_program(p.source, 100000);
        c.expect(r.ok() == p.ok, std::string("program outcome: ") + p.source);
        c.expect(p.ok ? r.text == p.expected : r.text.rfind(p.expected, 0) == 0,
                 std::string("program output: ") + p.source);
        ++programs;
    }
    c.expect(programs >= 30, "at least 30 programs");
    c.note = "100 corpora, " + std::to_string(queries) + " queries, " + std::to_string(programs) + " programs";
}

// --------------------------------------------------------------------------
// AC7 scripted end-to-end rollouts

void ac7(Checker& c) {
    const auto cfg = load_config(kFixtures / "run_config.json");
    const auto tasks = ingest_tasks(cfg.tasks);
    std::map<TaskDomain, int> per_domain;
    for (const auto& t : tasks) ++per_domain[t.domain];
    c.expect(tasks.size() == 6 && per_domain.size() == 3 && per_domain[TaskDomain::Math] == 2 &&
                 per_domain[TaskDomain::KnowledgeIntensive] == 2 && per_domain[TaskDomain::OpenDomain] == 2,
             "six tasks, two per domain");

    const SearchIndex index(read_corpus(cfg.corpus), cfg.bm25);
    ToolEnvironment env;
    env.index = &index;
    env.top_k = cfg.top_k;
    env.budget = cfg.tool_budget;
    auto backend = ScriptedBackend::from_file(cfg.scripts);
    RolloutOptions opt;
    opt.budget = cfg.rollout_budget;
    opt.reward = cfg.reward;
    opt.seed = cfg.seed;
    const auto results = run_rollouts(tasks, backend, env, opt, cfg.parallelism);

    std::stringstream log;
    for (const auto& r : results) log << to_json(r).dump() << '\n';
    const auto text = log.str();
    const auto entries = rescore_log(log, cfg.reward);
    c.expect(entries.size() == tasks.size(), "one log line per task");
    for (const auto& e : entries) c.expect(e.matches, "bit-for-bit rescore of " + e.id);

    bool penalty = false, exhausted = false;
    for (const auto& r : results) {
        if (r.task.id == "math-search") {
            c.near(r.reward.r_act, -1.0, 0.0, "penalty r_act");
            c.near(r.reward.r_out, 1.0, 0.0, "penalty r_out");
            c.near(r.reward.r, 0.8, 1e-12, "penalty r");
            penalty = true;
        }
        if (r.task.id == "ki-loop") {
            c.expect(r.termination == Termination::StepBudget, "budget termination");
            c.near(r.reward.r_out, 0.0, 0.0, "budget r_out");
            exhausted = true;
        }
        c.expect(r.well_formed || r.truncated, "logged transcript strict-parses: " + r.task.id);
    }
    c.expect(penalty && exhausted, "fixture covers penalty and budget cases");

    // a second run reproduces the log byte for byte
    std::stringstream again;
    for (const auto& r : run_rollouts(tasks, backend, env, opt, 1)) again << to_json(r).dump() << '\n';
    c.expect(again.str() == text, "reproducible log");
    c.note = std::to_string(entries.size()) + " rollouts rescored";
}

// --------------------------------------------------------------------------
// AC8 remote backend against a mock server

void ac8(Checker& c) {
    testing::MockChatServer server;
    RemoteConfig cfg;
    cfg.base_url = server.url();
    cfg.model = "mock";
    cfg.max_retries = 3;
    cfg.backoff_initial = std::chrono::milliseconds(5);
    cfg.backoff_max = std::chrono::milliseconds(20);
    RemoteBackend backend(cfg);

    server.queue({testing::chat_reply(" verbatim <text> ")});
    c.expect(backend.complete({}).text == " verbatim <text> ", "text returned verbatim");

    server.queue({{500, "{}"}, {500, "{}"}, testing::chat_reply("third time")});
    c.expect(backend.complete({}).text == "third time", "success after transient failures");
    c.expect(RemoteBackend::last_attempts() == 3, "three attempts");

    server.queue({{502, "{}"}});
    try {
        backend.complete({});
        c.expect(false, "exhaustion must raise");
    } catch (const Error& e) {
        c.expect(e.code() == ErrorCode::BackendUnavailable, "BackendUnavailable after exhaustion");
        c.expect(RemoteBackend::last_attempts() == 4, "1 + max_retries attempts");
    }

    server.queue({{401, "{}"}});
    try {
        backend.complete({});
        c.expect(false, "401 must raise");
    } catch (const Error& e) {
        c.expect(e.code() == ErrorCode::AuthenticationFailed, "401 is AuthenticationFailed");
        c.expect(RemoteBackend::last_attempts() == 1, "401 is not retried");
    }

    // the server stops before the closing tag; the rollout restores it and runs the tool
    server.queue({testing::chat_reply("<think>compute</think><code>print(17 * 23)"),
                  testing::chat_reply("<think>done</think>\\boxed{391}")});
    Task task;
    task.id = "m";
    task.question = "What is 17 * 23?";
    task.domain = TaskDomain::Math;
    task.gt = GroundTruth::math("391");
    const auto before = server.requests().size();
    const auto r = run_rollout(task, backend, ToolEnvironment{}, RolloutOptions{});
    const auto requests = server.requests();
    c.expect(requests.size() == before + 2, "two completions");
    if (requests.size() == before + 2) {
        const auto first = nlohmann::json::parse(requests[before]);
        c.expect(first.at("stop") == nlohmann::json::array({"</search>", "</code>"}), "stop sequences sent");
        c.expect(first.at("model") == "mock" && first.contains("temperature") && first.contains("messages"),
                 "request fields");
    }
    c.expect(r.transcript ==
                 "<think>compute</think><code>print(17 * 23)</code><result>391</result><think>done</think>\\boxed{391}",
             "closing tag restored and tool result injected");
    c.near(r.reward.r, 1.0, 1e-12, "rollout reward");
    c.note = "retry, exhaustion, auth and stop handling";
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"AC1", "reward formula fixtures", 1.0, ac1},
        {"AC2", "metric fixtures and randomized logs", 5.0, ac2},
        {"AC3", "GRPO math", 30.0, ac3},
        {"AC4", "ToolWorld tool-selection reproduction", 60.0, ac4},
        {"AC5", "protocol robustness", 60.0, ac5},
        {"AC6", "tool environment oracles", 30.0, ac6},
        {"AC7", "scripted end-to-end rollouts", 5.0, ac7},
        {"AC8", "remote backend contract", 10.0, ac8},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Checker c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.body(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < cr.limit_seconds;
        const bool pass = c.ok() && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s %s  %-40s %7.2fs (limit %.0fs)  %s%s%s\n", cr.id, pass ? "PASS" : "FAIL", cr.title, secs,
                    cr.limit_seconds, c.summary().c_str(), c.note.empty() ? "" : "; ", c.note.c_str());
        if (!in_time) std::printf("    time limit exceeded\n");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
