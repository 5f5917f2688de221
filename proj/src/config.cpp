// SPDX-License-Identifier: Apache-2.0
#include "tir/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <type_traits>

#include "tir/error.hpp"

namespace tir {

using nlohmann::json;

namespace {

void only_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(where) + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + std::string(where));
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    if constexpr (std::is_unsigned_v<T>) {
        if (!j.at(key).is_number_unsigned()) {
            throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be a non-negative integer");
        }
    }
    out = j.at(key).get<T>();
}

std::filesystem::path input_path(const json& j, const char* key, const std::filesystem::path& base) {
    if (!j.contains(key)) return {};
    std::filesystem::path p = j.at(key).get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) {
        throw Error(ErrorCode::InvalidConfig, std::string(key) + " path does not exist: " + p.string());
    }
    return p;
}

std::filesystem::path output_path(const json& j, const char* key, const std::filesystem::path& base) {
    if (!j.contains(key)) return {};
    std::filesystem::path p = j.at(key).get<std::string>();
    if (p.is_relative()) p = base / p;
    const auto dir = p.parent_path();
    if (!dir.empty() && !std::filesystem::is_directory(dir)) {
        throw Error(ErrorCode::InvalidConfig, std::string(key) + " directory does not exist: " + dir.string());
    }
    return p;
}

ToyPolicy toy_policy_from_json(const json& j) {
    ToyPolicy p;
    const auto& rows = j.at("logits");
    if (!rows.is_array() || rows.size() != kNumDomains) {
        throw Error(ErrorCode::InvalidConfig, "toy.logits must be a 3x3 array");
    }
    for (std::size_t d = 0; d < kNumDomains; ++d) {
        if (!rows[d].is_array() || rows[d].size() != kNumToyActions) {
            throw Error(ErrorCode::InvalidConfig, "toy.logits must be a 3x3 array");
        }
        for (std::size_t a = 0; a < kNumToyActions; ++a) p.logits[d][a] = rows[d][a].get<double>();
    }
    if (!p.finite()) throw Error(ErrorCode::InvalidConfig, "toy.logits must be finite");
    return p;
}

}  // namespace

std::string_view to_string(BackendKind k) noexcept {
    switch (k) {
        case BackendKind::Scripted: return "scripted";
        case BackendKind::Toy: return "toy";
        case BackendKind::Remote: return "remote";
    }
    return "?";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) noexcept {
    if (name == "scripted") return BackendKind::Scripted;
    if (name == "toy") return BackendKind::Toy;
    if (name == "remote") return BackendKind::Remote;
    return std::nullopt;
}

void RunConfig::validate() const {
    tool_budget.validate();
    if (top_k == 0) throw Error(ErrorCode::InvalidConfig, "top_k must be positive");
    if (!(bm25.k1 >= 0) || !(bm25.b >= 0 && bm25.b <= 1)) {
        throw Error(ErrorCode::InvalidConfig, "bm25 needs k1 >= 0 and 0 <= b <= 1");
    }
    if (code.kind == CodeBackend::Kind::Subprocess) {
        if (code.command_template.find("{file}") == std::string::npos) {
            throw Error(ErrorCode::InvalidConfig, "code command must contain {file}");
        }
        if (code.timeout.count() <= 0) throw Error(ErrorCode::InvalidConfig, "code timeout must be positive");
    }
    rollout_budget.validate();
    if (parallelism == 0) throw Error(ErrorCode::InvalidConfig, "parallelism must be positive");
    if (!(temperature > 0) || !std::isfinite(temperature)) {
        throw Error(ErrorCode::InvalidConfig, "temperature must be positive");
    }
    if (backend == BackendKind::Remote && !remote) {
        throw Error(ErrorCode::InvalidConfig, "backend 'remote' needs a backend.remote section");
    }
    if (remote) remote->validate();
    reward.validate();
    grpo.validate();
    if (train_updates == 0) throw Error(ErrorCode::InvalidConfig, "train.updates must be positive");
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base) {
    RunConfig c;
    try {
        only_keys(j, "config", {"paths", "tools", "rollout", "backend", "reward", "grpo", "train"});

        if (j.contains("paths")) {
            const auto& p = j["paths"];
            only_keys(p, "paths",
                      {"corpus", "index", "tasks", "scripts", "tool_template", "standalone_template", "log", "curve"});
            c.corpus = input_path(p, "corpus", base);
            c.index = input_path(p, "index", base);
            c.tasks = input_path(p, "tasks", base);
            c.scripts = input_path(p, "scripts", base);
            c.tool_template = input_path(p, "tool_template", base);
            c.standalone_template = input_path(p, "standalone_template", base);
            c.log = output_path(p, "log", base);
            c.curve = output_path(p, "curve", base);
        }

        if (j.contains("tools")) {
            const auto& t = j["tools"];
            only_keys(t, "tools",
                      {"max_result_bytes", "max_exec_steps", "max_calls_per_episode", "top_k", "bm25_k1", "bm25_b",
                       "code_backend", "code_command", "code_timeout_ms"});
            read(t, "max_result_bytes", c.tool_budget.max_result_bytes);
            read(t, "max_exec_steps", c.tool_budget.max_exec_steps);
            read(t, "max_calls_per_episode", c.tool_budget.max_calls_per_episode);
            read(t, "top_k", c.top_k);
            read(t, "bm25_k1", c.bm25.k1);
            read(t, "bm25_b", c.bm25.b);
            const auto kind = t.value("code_backend", std::string("builtin"));
            if (kind == "subprocess") {
                c.code = CodeBackend::subprocess(t.at("code_command").get<std::string>(),
                                                 std::chrono::milliseconds(t.value("code_timeout_ms", 10000)));
            } else if (kind != "builtin") {
                throw Error(ErrorCode::InvalidConfig, "code_backend must be 'builtin' or 'subprocess'");
            }
        }

        if (j.contains("rollout")) {
            const auto& r = j["rollout"];
            only_keys(r, "rollout",
                      {"max_steps", "max_transcript_bytes", "mode", "parallelism", "temperature", "seed"});
            read(r, "max_steps", c.rollout_budget.max_steps);
            read(r, "max_transcript_bytes", c.rollout_budget.max_transcript_bytes);
            read(r, "parallelism", c.parallelism);
            read(r, "temperature", c.temperature);
            read(r, "seed", c.seed);
            if (r.contains("mode")) {
                const auto m = parse_prompt_mode(r["mode"].get<std::string>());
                if (!m) throw Error(ErrorCode::InvalidConfig, "rollout.mode must be 'tool' or 'standalone'");
                c.mode = *m;
            }
        }

        if (j.contains("backend")) {
            const auto& b = j["backend"];
            only_keys(b, "backend", {"kind", "remote", "toy"});
            if (b.contains("kind")) {
                const auto k = parse_backend_kind(b["kind"].get<std::string>());
                if (!k) throw Error(ErrorCode::InvalidConfig, "backend.kind must be scripted, toy or remote");
                c.backend = *k;
            }
            if (b.contains("remote")) {
                only_keys(b["remote"], "backend.remote",
                          {"base_url", "model", "api_key_env", "max_retries", "backoff_initial_ms", "backoff_max_ms",
                           "timeout_ms", "supports_stop_sequences", "max_context_units", "max_tokens"});
                c.remote = remote_config_from_json(b["remote"]);
            }
            if (b.contains("toy")) {
                only_keys(b["toy"], "backend.toy", {"logits"});
                c.toy_policy = toy_policy_from_json(b["toy"]);
            }
        }

        if (j.contains("reward")) {
            const auto& r = j["reward"];
            only_keys(r, "reward", {"w_act", "w_out", "r_penalty", "r_out_floor"});
            read(r, "w_act", c.reward.w_act);
            read(r, "w_out", c.reward.w_out);
            read(r, "r_penalty", c.reward.r_penalty);
            read(r, "r_out_floor", c.reward.r_out_floor);
        }

        if (j.contains("grpo")) {
            const auto& g = j["grpo"];
            only_keys(g, "grpo",
                      {"group_size", "clip_epsilon", "kl_beta", "learning_rate", "temperature", "batch_size",
                       "epochs"});
            read(g, "group_size", c.grpo.group_size);
            read(g, "clip_epsilon", c.grpo.clip_epsilon);
            read(g, "kl_beta", c.grpo.kl_beta);
            read(g, "learning_rate", c.grpo.learning_rate);
            read(g, "temperature", c.grpo.temperature);
            read(g, "batch_size", c.grpo.batch_size);
            read(g, "epochs", c.grpo.epochs);
        }

        if (j.contains("train")) {
            const auto& t = j["train"];
            only_keys(t, "train", {"updates", "seed"});
            read(t, "updates", c.train_updates);
            read(t, "seed", c.train_seed);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "config is not valid JSON: " + std::string(e.what()));
    }
    return config_from_json(j, path.parent_path());
}

}  // namespace tir
