// SPDX-License-Identifier: Apache-2.0
//
// Task files: one JSON object per line with id, question, domain, gt_kind
// and either answer or constraints.

#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tir/protocol.hpp"
#include "tir/reward.hpp"

namespace tir {

struct Task {
    std::string id;
    std::string question;
    TaskDomain domain = TaskDomain::OpenDomain;
    GroundTruth gt;
    bool mixed_tools = false;
};

/// Validates one task object. Throws MalformedTask without a line number.
Task task_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Task& task);

/// Throws MalformedTask(line) on bad JSON, unknown domain or gt_kind, a
/// domain/evaluator mismatch, fields that do not belong to the gt_kind, or a
/// repeated id.
std::vector<Task> ingest_tasks(std::istream& in);
std::vector<Task> ingest_tasks(const std::filesystem::path& path);

}  // namespace tir
