// SPDX-License-Identifier: Apache-2.0
#include "tir/metrics.hpp"

#include <cstdio>

#include "tir/error.hpp"

namespace tir {

using nlohmann::json;

namespace {

bool is_qa(GroundTruthKind k) {
    return k == GroundTruthKind::Qa || k == GroundTruthKind::OpenQa;
}

std::optional<ToolKind> expected_tool(TaskDomain d) {
    if (d == TaskDomain::KnowledgeIntensive) return ToolKind::Search;
    if (d == TaskDomain::Math) return ToolKind::Code;
    return std::nullopt;
}

std::optional<double> ratio(double num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return num / static_cast<double>(den);
}

}  // namespace

bool is_correct(const GroundTruth& gt, const std::optional<std::string>& predicted) {
    if (!predicted) return false;
    switch (gt.kind) {
        case GroundTruthKind::Qa:
        case GroundTruthKind::OpenQa:
            for (const auto& a : gt.answers) {
                if (tir::exact_match(*predicted, a)) return true;
            }
            return false;
        case GroundTruthKind::Math:
            for (const auto& a : gt.answers) {
                if (math_equal(*predicted, a)) return true;
            }
            return false;
        case GroundTruthKind::Instruction: return if_score_strict(*predicted, gt.constraints) == 1;
    }
    return false;
}

void EpisodeRecord::recompute() {
    check_evaluator(domain, gt.kind);
    correct = is_correct(gt, predicted);
}

EpisodeRecord episode_from_json(const json& j) {
    EpisodeRecord r;
    r.id = j.at("id").get<std::string>();
    const auto domain = j.at("domain").get<std::string>();
    const auto d = parse_task_domain(domain);
    if (!d) throw Error(ErrorCode::MalformedLog, "unknown domain '" + domain + "'");
    r.domain = *d;
    for (const auto& t : j.at("invocations")) {
        const auto name = t.get<std::string>();
        const auto tool = parse_tool_kind(name);
        if (!tool) throw Error(ErrorCode::MalformedLog, "unknown tool '" + name + "'");
        r.invocations.push_back(*tool);
    }
    if (j.contains("predicted") && !j.at("predicted").is_null()) r.predicted = j.at("predicted").get<std::string>();
    r.gt = ground_truth_from_json(j.at("gt"));
    r.mixed_tools = j.value("mixed_tools", false);
    r.recompute();
    return r;
}

json to_json(const EpisodeRecord& r) {
    json inv = json::array();
    for (auto t : r.invocations) inv.push_back(to_string(t));
    json j{{"id", r.id},   {"domain", to_string(r.domain)}, {"invocations", inv},
           {"gt", to_json(r.gt)}, {"correct", r.correct}};
    j["predicted"] = r.predicted ? json(*r.predicted) : json(nullptr);
    if (r.mixed_tools) j["mixed_tools"] = true;
    return j;
}

std::vector<EpisodeRecord> read_episode_log(std::istream& in) {
    std::vector<EpisodeRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(episode_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedLog, e.what(), lineno);
        } catch (const Error& e) {
            const auto code = e.code() == ErrorCode::EvaluatorMismatch ? e.code() : ErrorCode::MalformedLog;
            throw Error(code, e.message(), lineno);
        }
    }
    return out;
}

std::optional<double> tool_selection(std::span<const EpisodeRecord> records) {
    std::size_t hits = 0, total = 0;
    for (const auto& r : records) {
        const auto want = expected_tool(r.domain);
        if (!want || r.mixed_tools) continue;
        for (auto t : r.invocations) {
            hits += t == *want ? 1 : 0;
            ++total;
        }
    }
    return ratio(static_cast<double>(hits), total);
}

std::optional<double> tool_productivity(std::span<const EpisodeRecord> records) {
    if (records.empty()) return std::nullopt;
    std::size_t correct = 0, calls = 0;
    for (const auto& r : records) {
        correct += r.correct ? 1 : 0;
        calls += r.invocations.size();
    }
    return static_cast<double>(correct) / static_cast<double>(1 + calls);
}

std::optional<double> exact_match(std::span<const EpisodeRecord> records) {
    std::size_t hits = 0, n = 0;
    for (const auto& r : records) {
        check_evaluator(r.domain, r.gt.kind);
        if (!is_qa(r.gt.kind)) continue;
        ++n;
        hits += is_correct(r.gt, r.predicted) ? 1 : 0;
    }
    return ratio(static_cast<double>(hits), n);
}

namespace {

double best_f1(const EpisodeRecord& r) {
    if (!r.predicted) return 0.0;
    double best = 0.0;
    for (const auto& a : r.gt.answers) best = std::max(best, f1_score(*r.predicted, a));
    return best;
}

double soft(const EpisodeRecord& r) {
    return r.predicted ? if_score_soft(*r.predicted, r.gt.constraints) : 0.0;
}

}  // namespace

std::optional<double> f1_macro(std::span<const EpisodeRecord> records) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        check_evaluator(r.domain, r.gt.kind);
        if (!is_qa(r.gt.kind)) continue;
        ++n;
        sum += best_f1(r);
    }
    return ratio(sum, n);
}

std::optional<double> soft_accuracy(std::span<const EpisodeRecord> records) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        check_evaluator(r.domain, r.gt.kind);
        if (r.gt.kind != GroundTruthKind::Instruction) continue;
        ++n;
        sum += soft(r);
    }
    return ratio(sum, n);
}

void MetricsAccumulator::add(const EpisodeRecord& r) {
    ++episodes_;
    invocations_ += r.invocations.size();
    correct_ += r.correct ? 1 : 0;
    if (const auto want = expected_tool(r.domain)) {
        if (r.mixed_tools) {
            ++ts_excluded_;
        } else {
            for (auto t : r.invocations) {
                ts_hits_ += t == *want ? 1 : 0;
                ++ts_total_;
            }
        }
    }
    if (is_qa(r.gt.kind)) {
        ++qa_n_;
        em_hits_ += is_correct(r.gt, r.predicted) ? 1 : 0;
        f1_sum_ += best_f1(r);
    } else if (r.gt.kind == GroundTruthKind::Instruction) {
        ++if_n_;
        sacc_sum_ += soft(r);
    }
}

void MetricsAccumulator::merge(const MetricsAccumulator& o) {
    episodes_ += o.episodes_;
    invocations_ += o.invocations_;
    correct_ += o.correct_;
    ts_hits_ += o.ts_hits_;
    ts_total_ += o.ts_total_;
    ts_excluded_ += o.ts_excluded_;
    em_hits_ += o.em_hits_;
    qa_n_ += o.qa_n_;
    f1_sum_ += o.f1_sum_;
    sacc_sum_ += o.sacc_sum_;
    if_n_ += o.if_n_;
}

DomainMetrics MetricsAccumulator::finish() const {
    DomainMetrics m;
    m.episodes = episodes_;
    m.invocations = invocations_;
    m.correct = correct_;
    m.ts_excluded = ts_excluded_;
    m.ts = ratio(static_cast<double>(ts_hits_), ts_total_);
    if (episodes_ > 0) m.tp = static_cast<double>(correct_) / static_cast<double>(1 + invocations_);
    m.accuracy = ratio(static_cast<double>(correct_), episodes_);
    m.em = ratio(static_cast<double>(em_hits_), qa_n_);
    m.f1 = ratio(f1_sum_, qa_n_);
    m.sacc = ratio(sacc_sum_, if_n_);
    return m;
}

void ReportBuilder::add(const EpisodeRecord& r) {
    domains_[static_cast<std::size_t>(r.domain)].add(r);
    overall_.add(r);
}

void ReportBuilder::merge(const ReportBuilder& other) {
    for (std::size_t i = 0; i < domains_.size(); ++i) domains_[i].merge(other.domains_[i]);
    overall_.merge(other.overall_);
}

MetricsReport ReportBuilder::finish() const {
    MetricsReport r;
    for (std::size_t i = 0; i < domains_.size(); ++i) r.per_domain[i] = domains_[i].finish();
    r.overall = overall_.finish();
    return r;
}

MetricsReport build_report(std::span<const EpisodeRecord> records) {
    ReportBuilder b;
    for (const auto& r : records) b.add(r);
    return b.finish();
}

MetricsReport build_report(std::istream& log) {
    ReportBuilder b;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(log, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            b.add(episode_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedLog, e.what(), lineno);
        } catch (const Error& e) {
            const auto code = e.code() == ErrorCode::EvaluatorMismatch ? e.code() : ErrorCode::MalformedLog;
            throw Error(code, e.message(), lineno);
        }
    }
    return b.finish();
}

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

json opt(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

json metrics_json(const DomainMetrics& m) {
    return {{"episodes", m.episodes}, {"invocations", m.invocations}, {"correct", m.correct},
            {"ts_excluded", m.ts_excluded}, {"ts", opt(m.ts)}, {"tp", opt(m.tp)},
            {"accuracy", opt(m.accuracy)}, {"em", opt(m.em)}, {"f1", opt(m.f1)}, {"sacc", opt(m.sacc)}};
}

}  // namespace

std::string render_table(const MetricsReport& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-20s %8s %8s %8s %8s %8s %8s %8s %8s\n", "domain", "episodes", "calls", "TS",
                  "TP", "acc", "EM", "F1", "SAcc");
    out += line;
    auto row = [&](std::string_view name, const DomainMetrics& m) {
        std::snprintf(line, sizeof line, "%-20.*s %8zu %8zu %8s %8s %8s %8s %8s %8s\n", static_cast<int>(name.size()),
                      name.data(), m.episodes, m.invocations, cell(m.ts).c_str(), cell(m.tp).c_str(),
                      cell(m.accuracy).c_str(), cell(m.em).c_str(), cell(m.f1).c_str(), cell(m.sacc).c_str());
        out += line;
    };
    for (std::size_t i = 0; i < report.per_domain.size(); ++i) {
        row(to_string(static_cast<TaskDomain>(i)), report.per_domain[i]);
    }
    row("overall", report.overall);
    if (report.overall.ts_excluded > 0) {
        out += "note: " + std::to_string(report.overall.ts_excluded) +
               " mixed-tool episode(s) excluded from TS\n";
    }
    return out;
}

json to_json(const MetricsReport& report) {
    json j;
    auto& per = j["domains"] = json::object();
    for (std::size_t i = 0; i < report.per_domain.size(); ++i) {
        per[std::string(to_string(static_cast<TaskDomain>(i)))] = metrics_json(report.per_domain[i]);
    }
    j["overall"] = metrics_json(report.overall);
    return j;
}

}  // namespace tir
