// SPDX-License-Identifier: Apache-2.0
#include "tir/tasks.hpp"

#include <fstream>
#include <set>

#include "tir/error.hpp"

namespace tir {

using nlohmann::json;

Task task_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedTask, "task must be a JSON object");
    Task t;
    try {
        t.id = j.at("id").get<std::string>();
        t.question = j.at("question").get<std::string>();
        const auto domain = j.at("domain").get<std::string>();
        const auto d = parse_task_domain(domain);
        if (!d) throw Error(ErrorCode::MalformedTask, "unknown domain '" + domain + "'");
        t.domain = *d;
        t.mixed_tools = j.value("mixed_tools", false);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedTask, e.what());
    }
    if (t.id.empty()) throw Error(ErrorCode::MalformedTask, "empty task id");

    t.gt = ground_truth_from_json(j);
    const bool is_if = t.gt.kind == GroundTruthKind::Instruction;
    if (!is_if && j.contains("constraints")) {
        throw Error(ErrorCode::MalformedTask,
                    "constraints are only valid with gt_kind 'if', not '" + std::string(to_string(t.gt.kind)) + "'");
    }
    if (is_if && j.contains("answer")) throw Error(ErrorCode::MalformedTask, "gt_kind 'if' takes constraints, not answer");
    try {
        check_evaluator(t.domain, t.gt.kind);
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedTask, e.message());
    }
    if (t.mixed_tools && t.domain == TaskDomain::OpenDomain) {
        throw Error(ErrorCode::MalformedTask, "mixed_tools applies to knowledge_intensive and math tasks only");
    }
    return t;
}

json to_json(const Task& task) {
    json j{{"id", task.id}, {"question", task.question}, {"domain", to_string(task.domain)}};
    j.update(to_json(task.gt));
    if (task.mixed_tools) j["mixed_tools"] = true;
    return j;
}

std::vector<Task> ingest_tasks(std::istream& in) {
    std::vector<Task> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto t = task_from_json(json::parse(line));
            if (!ids.insert(t.id).second) throw Error(ErrorCode::MalformedTask, "duplicate task id '" + t.id + "'");
            out.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedTask, e.what(), lineno);
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedTask, e.message(), lineno);
        }
    }
    return out;
}

std::vector<Task> ingest_tasks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open task file " + path.string());
    return ingest_tasks(in);
}

}  // namespace tir
