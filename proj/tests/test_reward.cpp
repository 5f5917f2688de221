// SPDX-License-Identifier: Apache-2.0
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <random>

#include "doctest.h"
#include "tir/error.hpp"
#include "tir/reward.hpp"
#include "transcript_gen.hpp"

using namespace tir;
using C = InstructionConstraint;

namespace {

Trajectory traj(TaskDomain d, const std::string& raw) {
    return make_trajectory("q", d, parse_transcript(raw, ParseMode::Lenient));
}

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no exception");
    return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("config validation") {
    RewardConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.w_act = 0.2;
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
    cfg = {};
    cfg.r_penalty = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.r_out_floor = 1.0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("action reward matches the case table") {
    const RewardConfig cfg;
    const std::set<ToolKind> none, s{ToolKind::Search}, c{ToolKind::Code}, both{ToolKind::Search, ToolKind::Code};
    // domain -> (none, search, code, both)
    struct Row {
        TaskDomain d;
        double v[4];
    };
    const Row table[] = {
        {TaskDomain::KnowledgeIntensive, {0.0, 1.0, -1.0, -1.0}},
        {TaskDomain::Math, {0.0, -1.0, 1.0, -1.0}},
        {TaskDomain::OpenDomain, {1.0, 1.0, 1.0, 1.0}},
    };
    for (const auto& row : table) {
        CHECK(action_reward(row.d, none, cfg) == row.v[0]);
        CHECK(action_reward(row.d, s, cfg) == row.v[1]);
        CHECK(action_reward(row.d, c, cfg) == row.v[2]);
        CHECK(action_reward(row.d, both, cfg) == row.v[3]);
    }
    RewardConfig harsh;
    harsh.r_penalty = -0.5;
    CHECK(action_reward(TaskDomain::Math, s, harsh) == -0.5);
}

TEST_CASE("f1 examples") {
    CHECK(f1_score("Barack Obama", "Obama") == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(f1_score("Paris", "Paris") == 1.0);
    CHECK(f1_score("", "Paris") == 0.0);
    CHECK(f1_score("the", "a") == 1.0);  // both empty after normalization
    CHECK(f1_score("The Eiffel Tower!", "eiffel tower") == 1.0);
    CHECK(exact_match("The  Paris.", "paris") == 1);
    CHECK(normalize_answer("  An Apple, a Day ") == "apple day");
}

namespace {

// Token overlap computed with sorted multisets.
double f1_oracle(const std::string& a, const std::string& b) {
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s + " ") {
            if (c == ' ') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        return out;
    };
    auto x = split(normalize_answer(a));
    auto y = split(normalize_answer(b));
    if (x.empty() || y.empty()) return x.empty() && y.empty() ? 1.0 : 0.0;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::vector<std::string> common;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
    if (common.empty()) return 0.0;
    const double n = static_cast<double>(common.size());
    return 2.0 * n / static_cast<double>(x.size() + y.size());
}

std::string random_phrase(std::mt19937_64& rng) {
    static const char* words[] = {"the", "a", "paris", "Paris", "france", "capital,", "city", "of", "an", "big"};
    std::string s;
    const auto n = rng() % 6;
    for (std::size_t i = 0; i < n; ++i) s += std::string(i ? " " : "") + words[rng() % 10];
    return s;
}

}  // namespace

TEST_CASE("f1 agrees with multiset oracle and is symmetric") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto a = random_phrase(rng);
        const auto b = random_phrase(rng);
        CAPTURE(a);
        CAPTURE(b);
        const double f = f1_score(a, b);
        CHECK(f == doctest::Approx(f1_oracle(a, b)).epsilon(1e-12));
        CHECK(f == doctest::Approx(f1_score(b, a)).epsilon(1e-15));
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        if (!normalize_answer(a).empty()) CHECK(f1_score(a, a) == 1.0);
    }
}

TEST_CASE("math equality") {
    CHECK(math_equal("0.5", "1/2") == 1);
    CHECK(math_equal("42", "42") == 1);
    CHECK(math_equal("41", "42") == 0);
    CHECK(math_equal("\\frac{3}{4}", "0.75") == 1);
    CHECK(math_equal("-\\frac{1}{2}", "-0.5") == 1);
    CHECK(math_equal("1,000", "1000") == 1);
    CHECK(math_equal("1,00", "100") == 0);
    CHECK(math_equal("007", "7") == 1);
    CHECK(math_equal("3.0", "3") == 1);
    CHECK(math_equal("2e3", "2000") == 1);
    CHECK(math_equal("$5$", "5") == 1);
    CHECK(math_equal("x = 5", "x=5") == 1);
    CHECK(math_equal("(1,2)", "(1,2)") == 1);
    CHECK(math_equal("1/0", "1/0") == 1);  // not numeric, falls back to string compare
    CHECK(math_equal("sqrt(2)", "1.414") == 0);
}

TEST_CASE("math equality against a rational oracle") {
    namespace mp = boost::multiprecision;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 3000; ++i) {
        const long long p1 = static_cast<long long>(rng() % 2001) - 1000;
        const long long q1 = static_cast<long long>(rng() % 20) + 1;
        const long long k = static_cast<long long>(rng() % 5) + 1;
        const bool same = rng() % 2 == 0;
        const long long p2 = same ? p1 * k : p1 * k + 1;
        const long long q2 = q1 * k;
        const bool equal = mp::cpp_rational(p1, q1) == mp::cpp_rational(p2, q2);
        const std::string a = std::to_string(p1) + "/" + std::to_string(q1);
        std::string b = "\\frac{" + std::to_string(p2) + "}{" + std::to_string(q2) + "}";
        if (p2 < 0) b = "-\\frac{" + std::to_string(-p2) + "}{" + std::to_string(q2) + "}";
        CAPTURE(a);
        CAPTURE(b);
        CHECK(math_equal(a, b) == (equal ? 1 : 0));
        // denominators 1, 2, 4, 5, 8, 10 have finite decimals
        const long long dens[] = {1, 2, 4, 5, 8, 10};
        const long long d = dens[rng() % 6];
        const long long n = static_cast<long long>(rng() % 1000);
        const long long scale = 1000;  // n/d * 1000 is an integer for every listed d
        const long long thousandths = n * scale / d;
        std::string dec = std::to_string(thousandths / 1000) + "." + std::to_string(1000 + thousandths % 1000).substr(1);
        CHECK(math_equal(dec, std::to_string(n) + "/" + std::to_string(d)) == 1);
        CHECK(math_equal(dec, std::to_string(n + 1) + "/" + std::to_string(d)) == 0);
    }
}

TEST_CASE("instruction constraints") {
    CHECK(if_score_strict("one two three", std::vector{C::min_words(3)}) == 1);
    CHECK(if_score_strict("one two", std::vector{C::min_words(3), C::keyword_frequency("two", 1)}) == 0);
    CHECK(code_of([] { if_score_strict("x", std::vector<C>{}); }) == ErrorCode::InvalidConstraint);
    CHECK(code_of([] { GroundTruth::instruction({}); }) == ErrorCode::InvalidConstraint);
    CHECK(code_of([] { C::keyword_frequency("  ", 1); }) == ErrorCode::InvalidConstraint);
    CHECK(code_of([] { C::letter_frequency('3', 1); }) == ErrorCode::InvalidConstraint);

    CHECK(satisfies("short text", C::max_words(2)));
    CHECK_FALSE(satisfies("three word text", C::max_words(2)));
    CHECK(keyword_count("Cat, cat! concatenate CAT", "cat") == 3);
    CHECK(keyword_count("new york and New-York", "new york") == 2);
    CHECK(satisfies("nothing here", C::forbidden_word("cat")));
    CHECK_FALSE(satisfies("a Cat here", C::forbidden_word("cat")));
    CHECK(letter_count("Eerie", 'e') == 3);
    CHECK(satisfies("Eerie", C::letter_frequency('E', 3)));
    CHECK(bullet_count("* a\n- b\n  * c\n*d\n-- e") == 3);
    CHECK(satisfies("* a\n* b", C::bullet_count(2)));
    CHECK_FALSE(satisfies("* a\n* b\n* c", C::bullet_count(2)));
    CHECK(satisfies("Hello there. Any other questions?  \n", C::ends_with("any other questions?")));

    const std::vector four{C::min_words(1), C::max_words(1), C::forbidden_word("x"), C::keyword_frequency("y", 1)};
    CHECK(if_score_soft("hello world", four) == 0.5);
    CHECK(if_score_soft("y", four) == 1.0);
}

TEST_CASE("constraint json round trip") {
    const std::vector all{C::min_words(3),        C::max_words(9), C::keyword_frequency("cat", 2), C::forbidden_word("dog"),
                          C::letter_frequency('e', 4), C::bullet_count(3), C::ends_with("done")};
    for (const auto& c : all) CHECK(constraint_from_json(to_json(c)) == c);
    CHECK(code_of([] { constraint_from_json(nlohmann::json{{"kind", "min_words"}, {"n", -1}}); }) ==
          ErrorCode::InvalidConstraint);
    CHECK(code_of([] { constraint_from_json(nlohmann::json{{"kind", "shout"}}); }) == ErrorCode::InvalidConstraint);
}

TEST_CASE("strict and soft scores agree on random inputs") {
    std::mt19937_64 rng(3);
    const char* words[] = {"cat", "dog", "* item", "- item", "eel", "end", "\n", "the"};
    for (int i = 0; i < 2000; ++i) {
        std::string response;
        const auto n = rng() % 12;
        for (std::size_t j = 0; j < n; ++j) response += std::string(j ? " " : "") + words[rng() % 8];
        std::vector<C> cs;
        const auto m = 1 + rng() % 4;
        for (std::size_t j = 0; j < m; ++j) {
            switch (rng() % 7) {
                case 0: cs.push_back(C::min_words(rng() % 8)); break;
                case 1: cs.push_back(C::max_words(rng() % 8)); break;
                case 2: cs.push_back(C::keyword_frequency("cat", rng() % 3)); break;
                case 3: cs.push_back(C::forbidden_word("dog")); break;
                case 4: cs.push_back(C::letter_frequency('e', rng() % 5)); break;
                case 5: cs.push_back(C::bullet_count(rng() % 2)); break;
                default: cs.push_back(C::ends_with("end")); break;
            }
        }
        const int strict = if_score_strict(response, cs);
        const double soft = if_score_soft(response, cs);
        CHECK((strict == 1) == (soft == 1.0));
        CHECK(soft >= 0.0);
        CHECK(soft <= 1.0);
    }
}

TEST_CASE("output reward examples") {
    const RewardConfig cfg;
    const auto qa = GroundTruth::qa({"Paris"});
    const auto wrong = traj(TaskDomain::KnowledgeIntensive, "<think>hm</think>\\boxed{Lyon}");
    CHECK(output_reward(wrong, qa, cfg).r_out == doctest::Approx(0.1));
    CHECK(output_reward(wrong, qa, cfg).formatted);
    const auto plain = traj(TaskDomain::KnowledgeIntensive, "<think>hm</think>Paris");
    CHECK(output_reward(plain, qa, cfg).r_out == 0.0);
    CHECK_FALSE(output_reward(plain, qa, cfg).formatted);
    const auto math = traj(TaskDomain::Math, "<code>print(1/2)</code><result>1/2</result>\\boxed{0.5}");
    CHECK(output_reward(math, GroundTruth::math("1/2"), cfg).r_out == 1.0);
    CHECK(code_of([&] { output_reward(math, qa, cfg); }) == ErrorCode::EvaluatorMismatch);

    const auto partial = traj(TaskDomain::KnowledgeIntensive, "\\boxed{Barack Obama}");
    CHECK(output_reward(partial, GroundTruth::qa({"Obama"}), cfg).r_out == doctest::Approx(2.0 / 3.0));
    CHECK(output_reward(partial, GroundTruth::qa({"Michelle", "Obama"}), cfg).r_out == doctest::Approx(2.0 / 3.0));

    const auto od = traj(TaskDomain::OpenDomain, "\\boxed{the Pacific}");
    CHECK(output_reward(od, GroundTruth::open_qa({"Pacific"}), cfg).r_out == 1.0);
    CHECK(output_reward(od, GroundTruth::instruction({C::min_words(5)}), cfg).r_out == doctest::Approx(0.1));
    CHECK(output_reward(od, GroundTruth::instruction({C::max_words(5)}), cfg).r_out == 1.0);
}

TEST_CASE("format gate") {
    const RewardConfig cfg;
    const auto gt = GroundTruth::qa({"Paris"});
    for (const std::string raw : {
             "<think>a</think>\\boxed{Paris}\\boxed{Paris}",  // two answers
             "<think>a\\boxed{Paris}",                          // unclosed think
             "<think>\\boxed{x}</think>\\boxed{Paris}",         // extra box in reasoning
             "\\boxed{Paris} trailing words",                   // text after the answer
             "<search>paris</search><think>a</think>",          // no answer
             "<think>a</think><foo>\\boxed{Paris}",             // unknown tag
             "\\boxed{Paris",                                   // unbalanced
         }) {
        CAPTURE(raw);
        const auto t = traj(TaskDomain::KnowledgeIntensive, raw);
        CHECK_FALSE(is_formatted(t));
        CHECK(output_reward(t, gt, cfg).r_out == 0.0);
    }
    CHECK(is_formatted(traj(TaskDomain::KnowledgeIntensive, "<think>a</think>The answer is \\boxed{Paris}\n")));
}

TEST_CASE("total reward") {
    const RewardConfig cfg;
    CHECK(total_reward(1.0, 0.5, cfg) == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(total_reward(-1.0, 0.0, cfg) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(total_reward(1.0, 1.0, cfg) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("penalty applies even with a correct answer") {
    const RewardConfig cfg;
    const auto t = traj(TaskDomain::Math, "<search>2+2</search><result>4</result>\\boxed{4}");
    const auto r = score_trajectory(t, GroundTruth::math("4"), cfg);
    CHECK(r.r_act == -1.0);
    CHECK(r.r_out == 1.0);
    CHECK(r.r == doctest::Approx(0.8));
}

TEST_CASE("reward range and decomposition over random trajectories") {
    std::mt19937_64 rng(17);
    const RewardConfig cfg;
    const TaskDomain domains[] = {TaskDomain::KnowledgeIntensive, TaskDomain::Math, TaskDomain::OpenDomain};
    for (int i = 0; i < 3000; ++i) {
        auto raw = testing::random_valid_transcript(rng);
        if (rng() % 4 == 0 && !raw.empty()) raw.erase(rng() % raw.size(), 1);  // sometimes corrupt it
        const auto domain = domains[rng() % 3];
        const auto t = traj(domain, raw);
        GroundTruth gt;
        switch (domain) {
            case TaskDomain::KnowledgeIntensive: gt = GroundTruth::qa({testing::random_answer(rng)}); break;
            case TaskDomain::Math: gt = GroundTruth::math(testing::random_answer(rng)); break;
            case TaskDomain::OpenDomain:
                gt = rng() % 2 ? GroundTruth::open_qa({testing::random_answer(rng)})
                               : GroundTruth::instruction({C::max_words(rng() % 4)});
                break;
        }
        const bool forced = rng() % 10 == 0;
        const auto r = score_trajectory(t, gt, cfg, forced);
        CAPTURE(raw);
        CHECK(r.r == cfg.w_act * r.r_act + cfg.w_out * r.r_out);
        CHECK(r.r >= cfg.w_act * cfg.r_penalty);
        CHECK(r.r <= 1.0);
        CHECK((r.r_out == 0.0 || (r.r_out >= cfg.r_out_floor && r.r_out <= 1.0)));
        if (!r.formatted) CHECK(r.r_out == 0.0);
        if (r.formatted) CHECK(r.r_out >= cfg.r_out_floor);
        if (forced) CHECK_FALSE(r.formatted);
        bool strict_ok = true;
        try {
            parse_transcript(raw, ParseMode::Strict);
        } catch (const Error&) {
            strict_ok = false;
        }
        if (!strict_ok) CHECK(r.r_out == 0.0);
        const bool wrong_tool = (domain == TaskDomain::Math && r.invoked.contains(ToolKind::Search)) ||
                                (domain == TaskDomain::KnowledgeIntensive && r.invoked.contains(ToolKind::Code));
        if (wrong_tool) CHECK(r.r_act == cfg.r_penalty);
        CHECK(score_trajectory(t, gt, cfg, forced).r == r.r);
    }
}

TEST_CASE("ground truth json") {
    const auto gt = ground_truth_from_json(nlohmann::json::parse(R"({"gt_kind":"qa","answer":["a","b"]})"));
    CHECK(gt.kind == GroundTruthKind::Qa);
    CHECK(gt.answers.size() == 2);
    const auto m = ground_truth_from_json(nlohmann::json::parse(R"({"gt_kind":"math","answer":42})"));
    CHECK(m.answers.at(0) == "42");
    const auto i = ground_truth_from_json(
        nlohmann::json::parse(R"({"gt_kind":"if","constraints":[{"kind":"min_words","n":2}]})"));
    CHECK(i.constraints.size() == 1);
    CHECK(ground_truth_from_json(to_json(i)).constraints == i.constraints);
    CHECK(code_of([] { ground_truth_from_json(nlohmann::json::parse(R"({"gt_kind":"if","constraints":[]})")); }) ==
          ErrorCode::MalformedTask);
    CHECK(code_of([] { ground_truth_from_json(nlohmann::json::parse(R"({"gt_kind":"poem","answer":"x"})")); }) ==
          ErrorCode::MalformedTask);
    CHECK(code_of([] { check_evaluator(TaskDomain::Math, GroundTruthKind::Qa); }) == ErrorCode::EvaluatorMismatch);
    CHECK_NOTHROW(check_evaluator(TaskDomain::OpenDomain, GroundTruthKind::OpenQa));
}
