// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "episode_gen.hpp"
#include "tir/error.hpp"
#include "tir/metrics.hpp"

using namespace tir;

namespace {

EpisodeRecord rec(TaskDomain d, std::vector<ToolKind> calls, bool correct) {
    EpisodeRecord r;
    r.domain = d;
    r.invocations = std::move(calls);
    r.correct = correct;
    r.gt = d == TaskDomain::Math ? GroundTruth::math("1") : GroundTruth::qa({"x"});
    if (d == TaskDomain::OpenDomain) r.gt = GroundTruth::open_qa({"x"});
    return r;
}

constexpr auto S = ToolKind::Search;
constexpr auto K = ToolKind::Code;

std::vector<EpisodeRecord> fixture_log() {
    std::ifstream in(std::filesystem::path(TIR_FIXTURES_DIR) / "episodes.jsonl");
    REQUIRE(in);
    return read_episode_log(in);
}

}  // namespace

TEST_CASE("tool selection") {
    const std::vector math{rec(TaskDomain::Math, {K, K}, true), rec(TaskDomain::Math, {S}, false)};
    CHECK(*tool_selection(math) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    const std::vector good{rec(TaskDomain::KnowledgeIntensive, {S, S}, true)};
    CHECK(*tool_selection(good) == 1.0);
    const std::vector od{rec(TaskDomain::OpenDomain, {S, K}, true)};
    CHECK_FALSE(tool_selection(od).has_value());
    CHECK_FALSE(tool_selection(std::vector{rec(TaskDomain::Math, {}, true)}).has_value());
}

TEST_CASE("tool productivity") {
    const std::vector log{rec(TaskDomain::Math, {K, K}, true), rec(TaskDomain::Math, {K}, true),
                          rec(TaskDomain::KnowledgeIntensive, {S}, true), rec(TaskDomain::OpenDomain, {}, false),
                          rec(TaskDomain::OpenDomain, {}, false)};
    CHECK(*tool_productivity(log) == doctest::Approx(0.6).epsilon(1e-12));
    const std::vector none{rec(TaskDomain::Math, {}, true), rec(TaskDomain::Math, {}, true)};
    CHECK(*tool_productivity(none) == 2.0);
    CHECK(*tool_productivity(std::vector{rec(TaskDomain::Math, {K}, false)}) == 0.0);
    CHECK_FALSE(tool_productivity(std::vector<EpisodeRecord>{}).has_value());
}

TEST_CASE("answer metrics") {
    auto qa = [](std::string pred, std::string gt) {
        EpisodeRecord r;
        r.domain = TaskDomain::KnowledgeIntensive;
        r.predicted = pred;
        r.gt = GroundTruth::qa({gt});
        r.recompute();
        return r;
    };
    const std::vector same{qa("Paris", "Paris"), qa("the Eiffel Tower", "Eiffel Tower")};
    CHECK(*exact_match(same) == 1.0);
    const std::vector mixed{qa("Barack Obama", "Obama"), qa("Paris", "Paris")};
    CHECK(*f1_macro(mixed) == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
    CHECK(*f1_macro(mixed) == doctest::Approx(0.8333).epsilon(1e-4));

    auto ifr = [](std::string pred, std::vector<InstructionConstraint> cs) {
        EpisodeRecord r;
        r.domain = TaskDomain::OpenDomain;
        r.predicted = pred;
        r.gt = GroundTruth::instruction(std::move(cs));
        r.recompute();
        return r;
    };
    using C = InstructionConstraint;
    const std::vector ifs{ifr("a b", {C::min_words(2), C::min_words(3)}), ifr("a b", {C::max_words(2)})};
    CHECK(*soft_accuracy(ifs) == 0.75);

    EpisodeRecord bad = qa("x", "x");
    bad.domain = TaskDomain::Math;
    try {
        exact_match(std::vector{bad});
        FAIL("expected EvaluatorMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EvaluatorMismatch);
    }
}

TEST_CASE("empty report") {
    std::istringstream empty("");
    const auto r = build_report(empty);
    CHECK(r.overall.episodes == 0);
    CHECK_FALSE(r.overall.tp.has_value());
    CHECK_FALSE(r.overall.ts.has_value());
    CHECK_FALSE(r.overall.em.has_value());
    CHECK(render_table(r).find("overall") != std::string::npos);
}

TEST_CASE("malformed log lines") {
    std::istringstream bad(R"({"id":"a","domain":"math","invocations":[],"predicted":"1","gt":{"gt_kind":"math","answer":"1"}})"
                           "\n{not json}\n");
    try {
        build_report(bad);
        FAIL("expected MalformedLog");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedLog);
        CHECK(e.line() == 2);
    }
    std::istringstream tool(R"({"id":"a","domain":"math","invocations":["calc"],"predicted":"1","gt":{"gt_kind":"math","answer":"1"}})");
    CHECK_THROWS_AS(build_report(tool), Error);
    std::istringstream mismatch(R"({"id":"a","domain":"math","invocations":[],"predicted":"1","gt":{"gt_kind":"qa","answer":"1"}})");
    try {
        build_report(mismatch);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EvaluatorMismatch);
        CHECK(e.line() == 1);
    }
}

TEST_CASE("fixture log report") {
    const auto log = fixture_log();
    REQUIRE(log.size() == 10);
    const auto r = build_report(log);
    const auto& o = r.overall;
    CHECK(o.episodes == 10);
    CHECK(o.invocations == 10);
    CHECK(o.correct == 6);  // stored "correct": false on e10 is overridden
    CHECK(*o.tp == doctest::Approx(6.0 / 11.0).epsilon(1e-12));
    CHECK(*o.ts == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
    CHECK(*o.em == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(*o.f1 == doctest::Approx(11.0 / 15.0).epsilon(1e-12));
    CHECK(*o.sacc == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(o.ts_excluded == 1);

    const auto& math = r.per_domain[static_cast<std::size_t>(TaskDomain::Math)];
    CHECK(*math.ts == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(*math.tp == 0.5);
    const auto& ki = r.per_domain[static_cast<std::size_t>(TaskDomain::KnowledgeIntensive)];
    CHECK(*ki.ts == 0.75);
    CHECK(*ki.tp == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
    CHECK(*ki.em == 0.5);
    const auto& od = r.per_domain[static_cast<std::size_t>(TaskDomain::OpenDomain)];
    CHECK_FALSE(od.ts.has_value());
    CHECK(*od.tp == 1.0);

    // agreement with the standalone operations
    CHECK(*o.tp == *tool_productivity(log));
    CHECK(*o.ts == *tool_selection(log));
    CHECK(*o.em == *exact_match(log));
    CHECK(*o.f1 == doctest::Approx(*f1_macro(log)).epsilon(1e-15));
    CHECK(*o.sacc == doctest::Approx(*soft_accuracy(log)).epsilon(1e-15));

    const auto j = to_json(r);
    CHECK(j.at("domains").at("open_domain").at("ts").is_null());
    CHECK(j.at("overall").at("episodes") == 10);

    for (const auto& e : log) CHECK(episode_from_json(to_json(e)).correct == e.correct);
}

TEST_CASE("randomized logs: pooling, permutation and sharding") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = testing::random_log(rng, 30);
        const auto b = testing::random_log(rng, 30);
        auto both = a;
        both.insert(both.end(), b.begin(), b.end());

        // pooled TS over the concatenation equals the hit ratio over the union of invocations
        std::size_t hits = 0, total = 0;
        for (const auto& r : both) {
            if (r.domain == TaskDomain::OpenDomain || r.mixed_tools) continue;
            for (auto t : r.invocations) {
                hits += (t == ToolKind::Search) == (r.domain == TaskDomain::KnowledgeIntensive) ? 1 : 0;
                ++total;
            }
        }
        const auto ts = tool_selection(both);
        CHECK(ts.has_value() == (total > 0));
        if (ts) CHECK(*ts == static_cast<double>(hits) / static_cast<double>(total));

        ReportBuilder left, right;
        for (const auto& r : a) left.add(r);
        for (const auto& r : b) right.add(r);
        left.merge(right);
        const auto merged = left.finish();
        auto shuffled = both;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto whole = build_report(shuffled);
        CHECK(merged.overall.episodes == whole.overall.episodes);
        CHECK(merged.overall.correct == whole.overall.correct);
        CHECK(merged.overall.ts == whole.overall.ts);
        CHECK(merged.overall.tp == whole.overall.tp);
        CHECK(merged.overall.em == whole.overall.em);
        if (merged.overall.f1) CHECK(*merged.overall.f1 == doctest::Approx(*whole.overall.f1).epsilon(1e-12));
        if (merged.overall.sacc) CHECK(*merged.overall.sacc == doctest::Approx(*whole.overall.sacc).epsilon(1e-12));
    }
}

TEST_CASE("TS and TP ignore answer text and TP is monotone") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        auto log = testing::random_log(rng, 20);
        if (log.empty()) continue;
        const auto ts = tool_selection(log);
        const auto tp = tool_productivity(log);
        auto edited = log;
        for (auto& r : edited) {
            if (r.predicted) r.predicted = *r.predicted + " (edited)";  // correct flag kept as is
        }
        CHECK(tool_selection(edited) == ts);
        CHECK(tool_productivity(edited) == tp);

        auto more_calls = log;
        more_calls[rng() % log.size()].invocations.push_back(ToolKind::Search);
        CHECK(*tool_productivity(more_calls) <= *tp);
        auto more_correct = log;
        more_correct[rng() % log.size()].correct = true;
        CHECK(*tool_productivity(more_correct) >= *tp);
    }
}
