// SPDX-License-Identifier: Apache-2.0
#include "tir/cli.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>

#include "CLI11.hpp"
#include "tir/backend.hpp"
#include "tir/config.hpp"
#include "tir/metrics.hpp"
#include "tir/remote.hpp"
#include "tir/rollout.hpp"
#include "tir/search.hpp"
#include "tir/tasks.hpp"
#include "tir/toolworld.hpp"

namespace tir {

using nlohmann::json;

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BackendUnavailable:
        case ErrorCode::AuthenticationFailed:
        case ErrorCode::ResponseSchemaError:
        case ErrorCode::IoError:
        case ErrorCode::DivergenceDetected:
        case ErrorCode::ShapeMismatch:
        case ErrorCode::CallBudgetExceeded:
        case ErrorCode::ProtocolViolation: return kExitRuntime;
        default: return kExitValidation;
    }
}

namespace {

struct Common {
    std::string config;
};

struct RolloutArgs {
    std::string tasks, scripts, corpus, index, backend, templ, log;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k, parallel, max_steps;
};

struct ScoreArgs {
    std::string log, out;
};

struct TrainArgs {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> updates;
    std::optional<double> beta;
    std::string out;
};

struct EvalArgs {
    std::string log, json_out;
};

struct IndexArgs {
    std::string corpus, out;
};

RunConfig base_config(const Common& c) {
    return c.config.empty() ? config_from_json(json::object()) : load_config(c.config);
}

// Output sink: the named file, or the fallback stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (path.empty()) return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw Error(ErrorCode::IoError, "cannot write " + path);
        stream_ = file_.get();
    }
    std::ostream& get() { return *stream_; }
    void close() {
        stream_->flush();
        if (!*stream_) throw Error(ErrorCode::IoError, "write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

std::filesystem::path pick(const std::string& flag, const std::filesystem::path& configured) {
    return flag.empty() ? configured : std::filesystem::path(flag);
}

int run_rollout_cmd(const Common& common, const RolloutArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = base_config(common);
    if (!a.backend.empty()) cfg.backend = *parse_backend_kind(a.backend);
    if (!a.templ.empty()) cfg.mode = *parse_prompt_mode(a.templ);
    if (a.seed) cfg.seed = *a.seed;
    if (a.k) cfg.top_k = *a.k;
    if (a.parallel) cfg.parallelism = *a.parallel;
    if (a.max_steps) cfg.rollout_budget.max_steps = *a.max_steps;
    cfg.validate();

    const auto tasks_path = pick(a.tasks, cfg.tasks);
    if (tasks_path.empty()) throw Error(ErrorCode::InvalidConfig, "no task file given (--tasks or paths.tasks)");
    const auto tasks = ingest_tasks(tasks_path);

    std::optional<SearchIndex> index;
    if (const auto p = pick(a.index, cfg.index); !p.empty()) {
        index = SearchIndex::load(p);
    } else if (const auto c = pick(a.corpus, cfg.corpus); !c.empty()) {
        index.emplace(read_corpus(c), cfg.bm25);
    }
    ToolEnvironment env;
    env.index = index ? &*index : nullptr;
    env.top_k = cfg.top_k;
    env.code = cfg.code;
    env.budget = cfg.tool_budget;

    std::unique_ptr<PolicyBackend> backend;
    switch (cfg.backend) {
        case BackendKind::Scripted: {
            const auto p = pick(a.scripts, cfg.scripts);
            if (p.empty()) throw Error(ErrorCode::InvalidConfig, "scripted backend needs --scripts or paths.scripts");
            auto scripted = std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(p));
            for (const auto& t : tasks) {
                if (!scripted->has_script(t.id)) throw Error(ErrorCode::InvalidConfig, "no script for task " + t.id);
            }
            backend = std::move(scripted);
            break;
        }
        case BackendKind::Toy: backend = std::make_unique<ToyBackend>(cfg.toy_policy, tasks); break;
        case BackendKind::Remote: backend = std::make_unique<RemoteBackend>(*cfg.remote); break;
    }

    RolloutOptions opt;
    const auto& tmpl_path = cfg.mode == PromptMode::ToolAssisted ? cfg.tool_template : cfg.standalone_template;
    opt.prompt = tmpl_path.empty() ? default_template(cfg.mode) : load_template(tmpl_path, cfg.mode);
    opt.budget = cfg.rollout_budget;
    opt.reward = cfg.reward;
    opt.temperature = cfg.temperature;
    opt.seed = cfg.seed;

    const auto results = run_rollouts(tasks, *backend, env, opt, cfg.parallelism);

    Sink sink(a.log.empty() ? cfg.log.string() : a.log, out);
    double total = 0.0;
    std::size_t answered = 0;
    for (const auto& r : results) {
        sink.get() << to_json(r).dump() << '\n';
        total += r.reward.r;
        answered += r.termination == Termination::Answered ? 1 : 0;
    }
    sink.close();
    char line[160];
    std::snprintf(line, sizeof line, "%zu rollouts, %zu answered, mean reward %.4f\n", results.size(), answered,
                  results.empty() ? 0.0 : total / static_cast<double>(results.size()));
    err << line;
    return kExitOk;
}

int run_score_cmd(const Common& common, const ScoreArgs& a, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = base_config(common);
    std::ifstream in(a.log);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open log " + a.log);
    const auto entries = rescore_log(in, cfg.reward);
    Sink sink(a.out, out);
    std::size_t mismatches = 0;
    for (const auto& e : entries) {
        sink.get() << to_json(e).dump() << '\n';
        if (!e.matches) {
            ++mismatches;
            err << "reward mismatch for " << e.id << '\n';
        }
    }
    sink.close();
    err << entries.size() << " entries rescored, " << mismatches << " mismatch(es)\n";
    return mismatches == 0 ? kExitOk : kExitValidation;
}

int run_train_cmd(const Common& common, const TrainArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = base_config(common);
    if (a.seed) cfg.train_seed = *a.seed;
    if (a.updates) cfg.train_updates = *a.updates;
    if (a.beta) cfg.grpo.kl_beta = *a.beta;
    cfg.validate();

    TrainOptions opt;
    opt.grpo = cfg.grpo;
    opt.reward = cfg.reward;
    opt.updates = cfg.train_updates;
    opt.seed = cfg.train_seed;
    const auto result = train_toy(opt);

    Sink sink(a.out.empty() ? cfg.curve.string() : a.out, out);
    write_curve_csv(sink.get(), result.curve);
    sink.close();

    double gap = 0.0;
    for (const auto& t : opt.probes) {
        gap += expected_reward(result.policy, t, opt.reward, opt.grpo.temperature) -
               optimal_expected_reward(t, opt.reward);
    }
    gap /= static_cast<double>(opt.probes.size());
    char line[200];
    std::snprintf(line, sizeof line,
                  "updates %zu: probe TS %.4f (greedy %.4f), expected reward minus optimum %+.4f, KL to ref %.4f\n",
                  result.curve.size(), result.curve.back().ts_probe, greedy_probe_ts(result.policy, opt.probes), gap,
                  result.curve.back().kl_to_ref);
    err << line;
    return kExitOk;
}

int run_eval_cmd(const EvalArgs& a, std::ostream& out, std::ostream&) {
    std::ifstream in(a.log);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open log " + a.log);
    const auto report = build_report(in);
    out << render_table(report);
    if (!a.json_out.empty()) {
        Sink sink(a.json_out, out);
        sink.get() << to_json(report).dump(2) << '\n';
        sink.close();
    }
    return kExitOk;
}

int run_index_cmd(const Common& common, const IndexArgs& a, std::ostream&, std::ostream& err) {
    const RunConfig cfg = base_config(common);
    const SearchIndex index(read_corpus(std::filesystem::path(a.corpus)), cfg.bm25);
    index.save(a.out);
    err << "indexed " << index.size() << " documents, " << index.terms().size() << " terms\n";
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tool-integrated reasoning harness"};
    app.name("tir");
    app.require_subcommand(1);

    Common common;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
    };

    RolloutArgs ra;
    auto* rollout = app.add_subcommand("rollout", "Run tasks against a backend and write a trajectory log");
    add_config(rollout);
    rollout->add_option("--tasks", ra.tasks, "Task JSONL")->check(CLI::ExistingFile);
    rollout->add_option("--scripts", ra.scripts, "Scripted backend turns (JSONL)")->check(CLI::ExistingFile);
    rollout->add_option("--corpus", ra.corpus, "Corpus JSONL to index in memory")->check(CLI::ExistingFile);
    rollout->add_option("--index", ra.index, "Saved search index")->check(CLI::ExistingFile);
    rollout->add_option("--backend", ra.backend, "scripted|toy|remote")
        ->check(CLI::IsMember({"scripted", "toy", "remote"}));
    rollout->add_option("--template", ra.templ, "tool|standalone")->check(CLI::IsMember({"tool", "standalone"}));
    rollout->add_option("--k", ra.k, "Search hits per call");
    rollout->add_option("--seed", ra.seed, "Base seed");
    rollout->add_option("--parallel", ra.parallel, "Concurrent rollouts");
    rollout->add_option("--max-steps", ra.max_steps, "Backend completions per rollout");
    rollout->add_option("--log", ra.log, "Output trajectory log (default stdout)");

    ScoreArgs sa;
    auto* score = app.add_subcommand("score", "Recompute rewards for a trajectory log");
    add_config(score);
    score->add_option("--log", sa.log, "Trajectory log")->required()->check(CLI::ExistingFile);
    score->add_option("--out", sa.out, "Output reward log (default stdout)");

    TrainArgs ta;
    auto* train = app.add_subcommand("train-toy", "Train the ToolWorld policy with GRPO and write the learning curve");
    add_config(train);
    train->add_option("--seed", ta.seed, "Training seed");
    train->add_option("--updates", ta.updates, "Policy updates");
    train->add_option("--beta", ta.beta, "KL penalty weight");
    train->add_option("--out", ta.out, "Learning curve CSV (default stdout)");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Compute metrics over an episode log");
    eval->add_option("--log", ea.log, "Episode or trajectory log")->required()->check(CLI::ExistingFile);
    eval->add_option("--json", ea.json_out, "Also write the report as JSON");

    IndexArgs ia;
    auto* index = app.add_subcommand("index", "Build a search index from a corpus");
    add_config(index);
    index->add_option("--corpus", ia.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    index->add_option("--out", ia.out, "Index file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    try {
        if (rollout->parsed()) return run_rollout_cmd(common, ra, out, err);
        if (score->parsed()) return run_score_cmd(common, sa, out, err);
        if (train->parsed()) return run_train_cmd(common, ta, out, err);
        if (eval->parsed()) return run_eval_cmd(ea, out, err);
        if (index->parsed()) return run_index_cmd(common, ia, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    err << app.help();
    return kExitValidation;
}

}  // namespace tir
