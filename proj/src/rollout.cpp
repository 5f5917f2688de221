// SPDX-License-Identifier: Apache-2.0
#include "tir/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>

#include "tir/error.hpp"
#include "tir/grpo.hpp"
#include "tir/metrics.hpp"

namespace tir {

using nlohmann::json;

void RolloutBudget::validate() const {
    if (max_steps == 0) throw Error(ErrorCode::InvalidConfig, "max_steps must be positive");
    if (max_transcript_bytes == 0) throw Error(ErrorCode::InvalidConfig, "max_transcript_bytes must be positive");
}

namespace {

constexpr std::pair<Termination, std::string_view> kTerminations[] = {
    {Termination::Answered, "answered"},
    {Termination::BackendFinished, "backend_finished"},
    {Termination::CallBudget, "call_budget"},
    {Termination::StepBudget, "step_budget"},
    {Termination::TranscriptBudget, "transcript_budget"},
};

constexpr std::string_view kCallBudgetNotice = "Error: tool call budget exhausted; give the final answer now.";

bool has_boxed(std::string_view text) {
    return text.find(tags::kBoxed) != std::string_view::npos;
}

// Server-side stops drop the matched closing tag; put it back.
std::string restore_stop(const std::string& transcript, std::string text, const Completion& c,
                         const std::vector<std::string>& stops) {
    if (c.matched_stop) {
        if (std::find(stops.begin(), stops.end(), *c.matched_stop) != stops.end()) text += *c.matched_stop;
        return text;
    }
    const std::string all = transcript + text;
    std::optional<ToolKind> open;
    std::size_t best = 0;
    for (auto tool : {ToolKind::Search, ToolKind::Code}) {
        const auto pos = all.rfind(tags::open_tag(tool));
        if (pos == std::string::npos || (open && pos < best)) continue;
        if (all.find(tags::close_tag(tool), pos) != std::string::npos) continue;
        open = tool;
        best = pos;
    }
    if (open) text += tags::close_tag(*open);
    return text;
}

struct Loop {
    const Task& task;
    PolicyBackend& backend;
    const ToolEnvironment& env;
    const RolloutOptions& opt;
    RolloutResult out;
    EpisodeState state;

    // Appends and reports whether the byte budget was hit.
    bool append(std::string_view text) {
        out.transcript += text;
        if (out.transcript.size() <= opt.budget.max_transcript_bytes) return false;
        out.transcript.resize(utf8_prefix(out.transcript, opt.budget.max_transcript_bytes).size());
        out.truncated = true;
        return true;
    }

    Completion ask(std::vector<std::string> stop) {
        CompletionRequest req;
        req.task_id = task.id;
        req.question = task.question;
        req.domain = task.domain;
        req.prompt = opt.prompt.render(task.question);
        req.transcript = out.transcript;
        req.stop = std::move(stop);
        req.temperature = opt.temperature;
        req.seed = opt.seed;
        req.step = out.steps++;
        return backend.complete(req);
    }

    // Result text for the trailing tool call, or nullopt when the transcript
    // does not end in a well-formed call.
    std::optional<std::string> observation(ToolKind tool, bool& budget_hit) {
        const auto segs = parse_transcript(out.transcript, ParseMode::Lenient);
        if (segs.empty() || segs.back().kind != SegmentKind::tool_call(tool)) return std::nullopt;
        auto traj = make_trajectory(task.question, task.domain, segs);
        std::string result;
        try {
            result = dispatch(tool, segs.back().text, env, state);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::CallBudgetExceeded) throw;
            budget_hit = true;
            result = kCallBudgetNotice;
        }
        return render(inject_result(std::move(traj), result).segments.back());
    }

    Termination run() {
        const bool tools = opt.prompt.mode == PromptMode::ToolAssisted;
        const std::vector<std::string> stops =
            tools ? std::vector<std::string>{std::string(tags::kSearchClose), std::string(tags::kCodeClose)}
                  : std::vector<std::string>{};
        const bool server_stops = backend.capabilities().supports_stop_sequences;

        while (out.steps < opt.budget.max_steps) {
            const auto c = ask(stops);
            std::string text = c.text;
            if (tools && server_stops && c.finish == FinishReason::Stop) {
                text = restore_stop(out.transcript, std::move(text), c, stops);
            }
            std::optional<StopBoundary> boundary;
            if (tools) {
                boundary = detect_stop(text);
                if (boundary) text.resize(boundary->offset + tags::close_tag(boundary->tool).size());
            }
            if (append(text)) return Termination::TranscriptBudget;

            if (boundary) {
                bool budget_hit = false;
                if (const auto obs = observation(boundary->tool, budget_hit)) {
                    if (append(*obs)) return Termination::TranscriptBudget;
                    if (budget_hit) return forced_answer();
                    continue;
                }
            }
            if (has_boxed(text)) return Termination::Answered;
            if (text.empty() || c.finish != FinishReason::Stop) return Termination::BackendFinished;
        }
        return Termination::StepBudget;
    }

    Termination forced_answer() {
        if (out.steps >= opt.budget.max_steps) return Termination::StepBudget;
        const auto c = ask({});
        if (append(c.text)) return Termination::TranscriptBudget;
        return has_boxed(c.text) ? Termination::Answered : Termination::CallBudget;
    }
};

Trajectory derive_trajectory(const std::string& transcript, const Task& task, PromptMode mode, bool& demoted) {
    auto traj = make_trajectory(task.question, task.domain, parse_transcript(transcript, ParseMode::Lenient));
    demoted = false;
    if (mode == PromptMode::Standalone) {
        demoted = !tool_calls(traj).empty();
        traj = demote_tools(std::move(traj));
    }
    return traj;
}

RewardBreakdown score(const Trajectory& traj, const Task& task, Termination t, const RewardConfig& cfg) {
    return score_trajectory(traj, task.gt, cfg, budget_exhausted(t));
}

}  // namespace

std::string_view to_string(Termination t) noexcept {
    for (const auto& [k, name] : kTerminations) {
        if (k == t) return name;
    }
    return "?";
}

std::optional<Termination> parse_termination(std::string_view name) noexcept {
    for (const auto& [k, n] : kTerminations) {
        if (n == name) return k;
    }
    return std::nullopt;
}

bool budget_exhausted(Termination t) noexcept {
    return t == Termination::StepBudget || t == Termination::TranscriptBudget;
}

RolloutResult run_rollout(const Task& task, PolicyBackend& backend, const ToolEnvironment& env,
                          const RolloutOptions& options) {
    options.budget.validate();
    Loop loop{task, backend, env, options, {}, {}};
    loop.out.task = task;
    loop.out.mode = options.prompt.mode;
    loop.out.termination = loop.run();

    auto& r = loop.out;
    r.trajectory = derive_trajectory(r.transcript, task, r.mode, r.tools_demoted);
    r.reward = score(r.trajectory, task, r.termination, options.reward);
    try {
        parse_transcript(r.transcript, ParseMode::Strict);
        r.well_formed = true;
    } catch (const Error&) {
        r.well_formed = false;
    }
    if (!budget_exhausted(r.termination)) r.predicted = r.trajectory.final_answer;
    r.correct = is_correct(task.gt, r.predicted);
    return r;
}

std::vector<RolloutResult> run_rollouts(std::span<const Task> tasks, PolicyBackend& backend,
                                        const ToolEnvironment& env, const RolloutOptions& options,
                                        std::size_t parallelism) {
    std::vector<RolloutResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;

    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= tasks.size() || failed.load()) return;
            try {
                RolloutOptions opt = options;
                opt.seed = derive_seed(options.seed, i, 0);
                results[i] = run_rollout(tasks[i], backend, env, opt);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                failed = true;
                return;
            }
        }
    };

    const auto n = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(tasks.size(), 1));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    return results;
}

namespace {

std::string_view type_name(SegmentType t) {
    switch (t) {
        case SegmentType::Think: return "think";
        case SegmentType::ToolCall: return "tool_call";
        case SegmentType::ToolResult: return "tool_result";
        case SegmentType::FinalAnswer: return "final_answer";
    }
    return "?";
}

std::string_view form_name(ThinkForm f) {
    switch (f) {
        case ThinkForm::Enclosed: return "enclosed";
        case ThinkForm::Unclosed: return "unclosed";
        case ThinkForm::Bare: return "bare";
    }
    return "?";
}

bool same_bits(double a, double b) {
    return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

json segments_to_json(std::span<const Segment> segments) {
    json arr = json::array();
    for (const auto& s : segments) {
        json j{{"type", type_name(s.kind.type)}, {"text", s.text}};
        if (s.kind.type == SegmentType::ToolCall) j["tool"] = to_string(s.kind.tool);
        if (s.kind.type == SegmentType::Think) j["form"] = form_name(s.form);
        if (s.loss_masked) j["loss_masked"] = true;
        arr.push_back(std::move(j));
    }
    return arr;
}

json to_json(const RolloutResult& r) {
    EpisodeRecord rec;
    rec.id = r.task.id;
    rec.domain = r.task.domain;
    rec.invocations = tool_calls(r.trajectory);
    rec.predicted = r.predicted;
    rec.gt = r.task.gt;
    rec.correct = r.correct;
    rec.mixed_tools = r.task.mixed_tools;
    json j = to_json(rec);
    j["question"] = r.task.question;
    j["mode"] = to_string(r.mode);
    j["transcript"] = r.transcript;
    j["segments"] = segments_to_json(r.trajectory.segments);
    j["termination"] = to_string(r.termination);
    j["truncated"] = r.truncated;
    j["tools_demoted"] = r.tools_demoted;
    j["well_formed"] = r.well_formed;
    j["steps"] = r.steps;
    j["reward"] = to_json(r.reward);
    return j;
}

RewardBreakdown reward_from_json(const json& j) {
    RewardBreakdown r;
    r.r_act = j.at("r_act").get<double>();
    r.r_out = j.at("r_out").get<double>();
    r.r = j.at("r").get<double>();
    r.formatted = j.at("formatted").get<bool>();
    for (const auto& t : j.at("invoked")) {
        const auto tool = parse_tool_kind(t.get<std::string>());
        if (!tool) throw Error(ErrorCode::MalformedLog, "unknown tool in reward.invoked");
        r.invoked.insert(*tool);
    }
    return r;
}

RescoredEntry rescore_entry(const json& line, const RewardConfig& cfg) {
    RescoredEntry e;
    try {
        Task task;
        task.id = line.at("id").get<std::string>();
        task.question = line.value("question", std::string{});
        const auto d = parse_task_domain(line.at("domain").get<std::string>());
        if (!d) throw Error(ErrorCode::MalformedLog, "unknown domain");
        task.domain = *d;
        task.gt = ground_truth_from_json(line.at("gt"));
        const auto mode = parse_prompt_mode(line.at("mode").get<std::string>());
        if (!mode) throw Error(ErrorCode::MalformedLog, "unknown mode");
        const auto term = parse_termination(line.at("termination").get<std::string>());
        if (!term) throw Error(ErrorCode::MalformedLog, "unknown termination");

        bool demoted = false;
        const auto traj = derive_trajectory(line.at("transcript").get<std::string>(), task, *mode, demoted);
        if (segments_to_json(traj.segments) != line.at("segments")) {
            throw Error(ErrorCode::MalformedLog, "logged segments do not match the transcript");
        }
        e.id = task.id;
        e.logged = reward_from_json(line.at("reward"));
        e.recomputed = score(traj, task, *term, cfg);
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::MalformedLog, ex.what());
    } catch (const Error& ex) {
        if (ex.code() == ErrorCode::EvaluatorMismatch) throw;
        throw Error(ErrorCode::MalformedLog, ex.message());
    }
    e.matches = same_bits(e.logged.r_act, e.recomputed.r_act) && same_bits(e.logged.r_out, e.recomputed.r_out) &&
                same_bits(e.logged.r, e.recomputed.r) && e.logged.formatted == e.recomputed.formatted &&
                e.logged.invoked == e.recomputed.invoked;
    return e;
}

std::vector<RescoredEntry> rescore_log(std::istream& in, const RewardConfig& cfg) {
    std::vector<RescoredEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(rescore_entry(json::parse(line), cfg));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedLog, e.what(), lineno);
        } catch (const Error& e) {
            throw Error(e.code(), e.message(), lineno);
        }
    }
    return out;
}

json to_json(const RescoredEntry& e) {
    return {{"id", e.id}, {"reward", to_json(e.recomputed)}, {"logged_reward", to_json(e.logged)},
            {"matches", e.matches}};
}

}  // namespace tir
