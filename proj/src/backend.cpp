// SPDX-License-Identifier: Apache-2.0
#include "tir/backend.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "json.hpp"
#include "tir/error.hpp"
#include "tir/grpo.hpp"

namespace tir {

using nlohmann::json;

std::string_view to_string(FinishReason f) noexcept {
    switch (f) {
        case FinishReason::Stop: return "stop";
        case FinishReason::Length: return "length";
        case FinishReason::EndOfText: return "end_of_text";
    }
    return "?";
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::vector<std::string>> scripts)
    : scripts_(std::move(scripts)) {}

ScriptedBackend ScriptedBackend::from_jsonl(std::istream& in) {
    std::map<std::string, std::vector<std::string>> scripts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            auto id = j.at("id").get<std::string>();
            auto turns = j.at("turns").get<std::vector<std::string>>();
            if (!scripts.emplace(id, std::move(turns)).second) {
                throw Error(ErrorCode::InvalidConfig, "duplicate script id '" + id + "'", lineno);
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, std::string("bad script line: ") + e.what(), lineno);
        }
    }
    return ScriptedBackend(std::move(scripts));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open script file " + path.string());
    return from_jsonl(in);
}

bool ScriptedBackend::has_script(const std::string& task_id) const {
    return scripts_.count(task_id) > 0;
}

Completion ScriptedBackend::complete(const CompletionRequest& request) {
    const auto it = scripts_.find(request.task_id);
    if (it == scripts_.end()) throw Error(ErrorCode::InvalidConfig, "no script for task '" + request.task_id + "'");
    if (request.step >= it->second.size()) return {"", FinishReason::EndOfText, std::nullopt};
    return {it->second[request.step], FinishReason::Stop, std::nullopt};
}

ToyBackend::ToyBackend(ToyPolicy policy, std::span<const Task> tasks) : policy_(policy) {
    for (const auto& t : tasks) {
        answers_[t.id] = t.gt.answers.empty() ? std::string("done") : t.gt.answers.front();
    }
}

namespace {

ToyAction sample_action(const ActionProbs& p, std::mt19937_64& rng) {
    std::discrete_distribution<int> pick(p.begin(), p.end());
    return static_cast<ToyAction>(pick(rng));
}

}  // namespace

Completion ToyBackend::complete(const CompletionRequest& request) {
    std::mt19937_64 rng(derive_seed(request.seed, 0x70, 0));
    const auto action = sample_action(policy_.probabilities(request.domain, request.temperature), rng);
    const auto success = default_success_probs(request.domain)[static_cast<std::size_t>(action)];
    const bool correct = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < success;

    const auto it = answers_.find(request.task_id);
    const std::string answer = correct && it != answers_.end() ? it->second : "unknown";
    const std::string boxed = "\\boxed{" + answer + "}";

    if (action == ToyAction::NoTool || request.step > 0) {
        const std::string lead = request.step > 0 ? "The result settles it." : "I can answer directly.";
        return {"<think>" + lead + "</think>" + boxed, FinishReason::EndOfText, std::nullopt};
    }
    const auto tool = action == ToyAction::UseSearch ? ToolKind::Search : ToolKind::Code;
    std::string text = tool == ToolKind::Search ? "<think>I should look this up.</think><search>" + request.question
                                                : std::string("<think>I should compute this.</think><code>print(6 * 7)");
    const auto close = std::string(tags::close_tag(tool));
    if (std::find(request.stop.begin(), request.stop.end(), close) != request.stop.end()) {
        return {text, FinishReason::Stop, close};
    }
    return {text + close, FinishReason::Stop, std::nullopt};
}

}  // namespace tir
