// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics over episode logs: tool selection accuracy (TS), tool
// productivity (TP), exact match, F1 and soft instruction accuracy (SAcc).

#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tir/protocol.hpp"
#include "tir/reward.hpp"

namespace tir {

struct EpisodeRecord {
    std::string id;
    TaskDomain domain = TaskDomain::OpenDomain;
    std::vector<ToolKind> invocations;
    std::optional<std::string> predicted;
    GroundTruth gt;
    bool correct = false;
    bool mixed_tools = false;  // task needs both tools; excluded from TS

    /// Re-derives `correct` from predicted and gt. Throws EvaluatorMismatch.
    void recompute();
};

/// Evaluator verdict: exact match for qa and open_qa, math equality for
/// math, all constraints for instruction tasks. A missing prediction is wrong.
bool is_correct(const GroundTruth& gt, const std::optional<std::string>& predicted);

/// Reads one log line: id, domain, invocations, predicted, gt, optional
/// mixed_tools. A stored `correct` field is ignored and recomputed. Extra
/// fields are allowed.
EpisodeRecord episode_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EpisodeRecord& r);

/// Throws MalformedLog with the 1-based line number.
std::vector<EpisodeRecord> read_episode_log(std::istream& in);

/// Pooled over all invocations of knowledge-intensive and math records;
/// nullopt when there are none.
std::optional<double> tool_selection(std::span<const EpisodeRecord> records);
/// correct / (1 + invocations); nullopt for an empty list.
std::optional<double> tool_productivity(std::span<const EpisodeRecord> records);
/// Means over qa and open_qa records.
std::optional<double> exact_match(std::span<const EpisodeRecord> records);
std::optional<double> f1_macro(std::span<const EpisodeRecord> records);
/// Mean soft constraint score over instruction records.
std::optional<double> soft_accuracy(std::span<const EpisodeRecord> records);

struct DomainMetrics {
    std::size_t episodes = 0;
    std::size_t invocations = 0;
    std::size_t correct = 0;
    std::size_t ts_excluded = 0;  // mixed-tool episodes left out of TS
    std::optional<double> ts;
    std::optional<double> tp;
    std::optional<double> accuracy;
    std::optional<double> em;
    std::optional<double> f1;
    std::optional<double> sacc;
};

/// Mergeable running totals. Integer counts are exact; the F1 and SAcc sums
/// are floating point.
class MetricsAccumulator {
public:
    void add(const EpisodeRecord& r);
    void merge(const MetricsAccumulator& other);
    DomainMetrics finish() const;

private:
    std::size_t episodes_ = 0;
    std::size_t invocations_ = 0;
    std::size_t correct_ = 0;
    std::size_t ts_hits_ = 0;
    std::size_t ts_total_ = 0;
    std::size_t ts_excluded_ = 0;
    std::size_t em_hits_ = 0;
    std::size_t qa_n_ = 0;
    double f1_sum_ = 0.0;
    double sacc_sum_ = 0.0;
    std::size_t if_n_ = 0;
};

struct MetricsReport {
    std::array<DomainMetrics, 3> per_domain;  // indexed by TaskDomain
    DomainMetrics overall;
};

class ReportBuilder {
public:
    void add(const EpisodeRecord& r);
    void merge(const ReportBuilder& other);
    MetricsReport finish() const;

private:
    std::array<MetricsAccumulator, 3> domains_;
    MetricsAccumulator overall_;
};

MetricsReport build_report(std::span<const EpisodeRecord> records);
/// Streams a JSONL log. Throws MalformedLog(line), or EvaluatorMismatch with the line.
MetricsReport build_report(std::istream& log);

std::string render_table(const MetricsReport& report);
nlohmann::json to_json(const MetricsReport& report);

}  // namespace tir
