// SPDX-License-Identifier: Apache-2.0
#include "tir/reward.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include "tir/error.hpp"

namespace tir {

using nlohmann::json;
namespace mp = boost::multiprecision;

void RewardConfig::validate() const {
    if (std::fabs(w_act + w_out - 1.0) > 1e-12) throw Error(ErrorCode::InvalidConfig, "w_act + w_out must equal 1");
    if (!(r_penalty < 0.0)) throw Error(ErrorCode::InvalidConfig, "r_penalty must be negative");
    if (!(r_out_floor > 0.0 && r_out_floor < 1.0)) throw Error(ErrorCode::InvalidConfig, "r_out_floor must be in (0, 1)");
}

std::string_view to_string(GroundTruthKind kind) noexcept {
    switch (kind) {
        case GroundTruthKind::Qa: return "qa";
        case GroundTruthKind::Math: return "math";
        case GroundTruthKind::Instruction: return "if";
        case GroundTruthKind::OpenQa: return "open_qa";
    }
    return "?";
}

std::optional<GroundTruthKind> parse_ground_truth_kind(std::string_view name) noexcept {
    if (name == "qa") return GroundTruthKind::Qa;
    if (name == "math") return GroundTruthKind::Math;
    if (name == "if") return GroundTruthKind::Instruction;
    if (name == "open_qa") return GroundTruthKind::OpenQa;
    return std::nullopt;
}

GroundTruth GroundTruth::qa(std::vector<std::string> answers) {
    return {GroundTruthKind::Qa, std::move(answers), {}};
}
GroundTruth GroundTruth::math(std::string answer) {
    return {GroundTruthKind::Math, {std::move(answer)}, {}};
}
GroundTruth GroundTruth::open_qa(std::vector<std::string> answers) {
    return {GroundTruthKind::OpenQa, std::move(answers), {}};
}
GroundTruth GroundTruth::instruction(std::vector<InstructionConstraint> constraints) {
    if (constraints.empty()) throw Error(ErrorCode::InvalidConstraint, "instruction task needs at least one constraint");
    for (const auto& c : constraints) c.validate();
    return {GroundTruthKind::Instruction, {}, std::move(constraints)};
}

GroundTruth ground_truth_from_json(const json& j) {
    try {
        const auto name = j.at("gt_kind").get<std::string>();
        const auto kind = parse_ground_truth_kind(name);
        if (!kind) throw Error(ErrorCode::MalformedTask, "unknown gt_kind '" + name + "'");
        if (*kind == GroundTruthKind::Instruction) {
            std::vector<InstructionConstraint> cs;
            for (const auto& c : j.at("constraints")) cs.push_back(constraint_from_json(c));
            return GroundTruth::instruction(std::move(cs));
        }
        std::vector<std::string> answers;
        const auto& a = j.at("answer");
        if (a.is_array()) {
            for (const auto& x : a) answers.push_back(x.get<std::string>());
        } else if (a.is_number()) {
            answers.push_back(a.dump());
        } else {
            answers.push_back(a.get<std::string>());
        }
        if (answers.empty()) throw Error(ErrorCode::MalformedTask, "answer list is empty");
        return GroundTruth{*kind, std::move(answers), {}};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedTask, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidConstraint) throw Error(ErrorCode::MalformedTask, e.message());
        throw;
    }
}

json to_json(const GroundTruth& gt) {
    json j{{"gt_kind", to_string(gt.kind)}};
    if (gt.kind == GroundTruthKind::Instruction) {
        auto& arr = j["constraints"] = json::array();
        for (const auto& c : gt.constraints) arr.push_back(to_json(c));
    } else if (gt.answers.size() == 1) {
        j["answer"] = gt.answers[0];
    } else {
        j["answer"] = gt.answers;
    }
    return j;
}

void check_evaluator(TaskDomain domain, GroundTruthKind kind) {
    const bool ok = (domain == TaskDomain::KnowledgeIntensive && kind == GroundTruthKind::Qa) ||
                    (domain == TaskDomain::Math && kind == GroundTruthKind::Math) ||
                    (domain == TaskDomain::OpenDomain &&
                     (kind == GroundTruthKind::Instruction || kind == GroundTruthKind::OpenQa));
    if (!ok) {
        throw Error(ErrorCode::EvaluatorMismatch, "evaluator '" + std::string(to_string(kind)) +
                                                      "' does not apply to domain " + std::string(to_string(domain)));
    }
}

double action_reward(TaskDomain domain, const std::set<ToolKind>& invoked, const RewardConfig& cfg) {
    if (domain == TaskDomain::OpenDomain) return 1.0;
    const ToolKind right = domain == TaskDomain::Math ? ToolKind::Code : ToolKind::Search;
    const ToolKind wrong = domain == TaskDomain::Math ? ToolKind::Search : ToolKind::Code;
    if (invoked.contains(wrong)) return cfg.r_penalty;
    if (invoked.contains(right)) return 1.0;
    return 0.0;
}

// ---------------------------------------------------------------------------
// answer comparison

std::string normalize_answer(std::string_view s) {
    std::string no_punct;
    no_punct.reserve(s.size());
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::ispunct(c)) continue;
        no_punct.push_back(static_cast<char>(std::tolower(c)));
    }
    std::istringstream in(no_punct);
    std::string word, out;
    while (in >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::string strip_spaces(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

std::optional<mp::cpp_rational> parse_decimal(std::string_view s) {
    if (s.empty()) return std::nullopt;
    bool neg = false;
    if (s[0] == '+' || s[0] == '-') {
        neg = s[0] == '-';
        s.remove_prefix(1);
    }
    std::string digits;
    std::size_t i = 0;
    std::size_t int_digits = 0;
    // integer part, optionally with thousands separators
    const auto head = s.substr(0, s.find_first_not_of("0123456789,"));
    if (head.find(',') != std::string_view::npos) {
        static const std::regex grouped(R"(\d{1,3}(,\d{3})+)");
        if (!std::regex_match(head.begin(), head.end(), grouped)) return std::nullopt;
    }
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == ',')) {
        if (s[i] != ',') {
            digits.push_back(s[i]);
            ++int_digits;
        }
        ++i;
    }
    std::size_t frac_digits = 0;
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            digits.push_back(s[i++]);
            ++frac_digits;
        }
    }
    if (int_digits + frac_digits == 0) return std::nullopt;
    long exponent = 0;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        bool eneg = false;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) eneg = s[i++] == '-';
        std::size_t start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) && i - start < 6) {
            exponent = exponent * 10 + (s[i++] - '0');
        }
        if (i == start) return std::nullopt;
        if (eneg) exponent = -exponent;
    }
    if (i != s.size()) return std::nullopt;
    // a leading zero would make cpp_int read the digits as octal
    digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
    mp::cpp_rational value{mp::cpp_int(digits)};
    exponent -= static_cast<long>(frac_digits);
    if (std::labs(exponent) > 4000) return std::nullopt;
    const mp::cpp_int scale = mp::pow(mp::cpp_int(10), static_cast<unsigned>(std::labs(exponent)));
    if (exponent >= 0) {
        value *= scale;
    } else {
        value /= mp::cpp_rational(scale);
    }
    return neg ? -value : value;
}

/// Exact value of a numeric answer: integers, decimals, a/b and \frac{a}{b}.
std::optional<mp::cpp_rational> parse_exact(std::string_view raw) {
    std::string s = strip_spaces(raw);
    while (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = s.substr(1, s.size() - 2);
    if (s.empty()) return std::nullopt;
    bool neg = false;
    std::string_view v = s;
    for (const std::string_view cmd : {"\\frac{", "\\dfrac{", "\\tfrac{", "-\\frac{", "-\\dfrac{", "-\\tfrac{"}) {
        if (!v.starts_with(cmd)) continue;
        neg = cmd[0] == '-';
        v.remove_prefix(cmd.size());
        const auto mid = v.find("}{");
        if (mid == std::string_view::npos || v.back() != '}') return std::nullopt;
        const auto num = parse_decimal(v.substr(0, mid));
        const auto den = parse_decimal(v.substr(mid + 2, v.size() - mid - 3));
        if (!num || !den || *den == 0) return std::nullopt;
        const mp::cpp_rational q = *num / *den;
        return neg ? -q : q;
    }
    const auto slash = v.find('/');
    if (slash != std::string_view::npos) {
        const auto num = parse_decimal(v.substr(0, slash));
        const auto den = parse_decimal(v.substr(slash + 1));
        if (!num || !den || *den == 0) return std::nullopt;
        return *num / *den;
    }
    return parse_decimal(v);
}

std::string normalize_math_string(std::string_view raw) {
    std::string s = strip_spaces(raw);
    std::size_t lead = 0;
    while (lead + 1 < s.size() && s[lead] == '0' && std::isdigit(static_cast<unsigned char>(s[lead + 1]))) ++lead;
    s.erase(0, lead);
    while (s.size() > 2 && s.ends_with(".0")) s.erase(s.size() - 2);
    return s;
}

}  // namespace

double f1_score(std::string_view pred, std::string_view gt) {
    const auto p = split_ws(normalize_answer(pred));
    const auto g = split_ws(normalize_answer(gt));
    if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : g) ++counts[t];
    int common = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

int exact_match(std::string_view pred, std::string_view gt) {
    return normalize_answer(pred) == normalize_answer(gt) ? 1 : 0;
}

int math_equal(std::string_view pred, std::string_view gt) {
    const auto a = parse_exact(pred);
    const auto b = parse_exact(gt);
    if (a && b) return *a == *b ? 1 : 0;
    return normalize_math_string(pred) == normalize_math_string(gt) ? 1 : 0;
}

double evaluate_answer(const GroundTruth& gt, std::string_view pred) {
    if (gt.kind == GroundTruthKind::Instruction) return if_score_strict(pred, gt.constraints);
    double best = 0.0;
    for (const auto& answer : gt.answers) {
        double s = 0.0;
        switch (gt.kind) {
            case GroundTruthKind::Qa: s = f1_score(pred, answer); break;
            case GroundTruthKind::Math: s = math_equal(pred, answer); break;
            case GroundTruthKind::OpenQa: s = exact_match(pred, answer); break;
            case GroundTruthKind::Instruction: break;
        }
        best = std::max(best, s);
    }
    return best;
}

// ---------------------------------------------------------------------------
// trajectory scoring

bool is_formatted(const Trajectory& trajectory) {
    std::vector<Segment> segs;
    try {
        segs = parse_transcript(render(trajectory), ParseMode::Strict);
    } catch (const Error&) {
        return false;
    }
    if (segs.empty() || segs.back().kind.type != SegmentType::FinalAnswer) return false;
    std::size_t boxes = 0;
    for (const auto& s : segs) {
        if (s.kind.type != SegmentType::Think && s.kind.type != SegmentType::FinalAnswer) continue;
        for (auto pos = s.text.find(tags::kBoxed); pos != std::string::npos; pos = s.text.find(tags::kBoxed, pos + 1)) {
            ++boxes;
        }
    }
    return boxes == 1 && extract_boxed(segs.back().text).has_value();
}

OutputReward output_reward(const Trajectory& trajectory, const GroundTruth& gt, const RewardConfig& cfg) {
    check_evaluator(trajectory.domain, gt.kind);
    if (!is_formatted(trajectory)) return {0.0, false};
    const auto segs = parse_transcript(render(trajectory), ParseMode::Strict);
    const auto pred = extract_boxed(segs.back().text).value_or("");
    return {std::max(cfg.r_out_floor, evaluate_answer(gt, pred)), true};
}

double total_reward(double r_act, double r_out, const RewardConfig& cfg) {
    return cfg.w_act * r_act + cfg.w_out * r_out;
}

RewardBreakdown score_trajectory(const Trajectory& trajectory, const GroundTruth& gt, const RewardConfig& cfg,
                                 bool force_unformatted) {
    RewardBreakdown out;
    for (auto t : tool_calls(trajectory)) out.invoked.insert(t);
    out.r_act = action_reward(trajectory.domain, out.invoked, cfg);
    if (force_unformatted) {
        check_evaluator(trajectory.domain, gt.kind);
    } else {
        const auto o = output_reward(trajectory, gt, cfg);
        out.r_out = o.r_out;
        out.formatted = o.formatted;
    }
    out.r = total_reward(out.r_act, out.r_out, cfg);
    return out;
}

json to_json(const RewardBreakdown& r) {
    json invoked = json::array();
    for (auto t : r.invoked) invoked.push_back(to_string(t));
    return {{"r_act", r.r_act}, {"r_out", r.r_out}, {"r", r.r}, {"formatted", r.formatted}, {"invoked", invoked}};
}

}  // namespace tir
