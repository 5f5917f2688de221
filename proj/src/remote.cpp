// SPDX-License-Identifier: Apache-2.0
#include "tir/remote.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "tir/error.hpp"

namespace tir {

using nlohmann::json;

namespace {

thread_local int g_last_attempts = 0;

bool retryable(int status) {
    return status == 408 || status == 429 || status >= 500;
}

}  // namespace

void RemoteConfig::validate() const {
    if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
        throw Error(ErrorCode::InvalidConfig, "remote base_url must start with http:// or https://");
    }
    if (model.empty()) throw Error(ErrorCode::InvalidConfig, "remote model is empty");
    if (max_retries < 0) throw Error(ErrorCode::InvalidConfig, "max_retries must be >= 0");
    if (backoff_initial.count() < 0 || backoff_max < backoff_initial) {
        throw Error(ErrorCode::InvalidConfig, "backoff must satisfy 0 <= initial <= max");
    }
    if (timeout.count() <= 0) throw Error(ErrorCode::InvalidConfig, "timeout must be positive");
    if (max_context_units == 0) throw Error(ErrorCode::InvalidConfig, "max_context_units must be positive");
    if (max_tokens && *max_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "max_tokens must be positive");
}

RemoteConfig remote_config_from_json(const json& j) {
    RemoteConfig c;
    try {
        c.base_url = j.at("base_url").get<std::string>();
        c.model = j.at("model").get<std::string>();
        c.api_key_env = j.value("api_key_env", std::string{});
        c.max_retries = j.value("max_retries", c.max_retries);
        c.backoff_initial = std::chrono::milliseconds(j.value("backoff_initial_ms", c.backoff_initial.count()));
        c.backoff_max = std::chrono::milliseconds(j.value("backoff_max_ms", c.backoff_max.count()));
        c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
        c.supports_stop_sequences = j.value("supports_stop_sequences", c.supports_stop_sequences);
        c.max_context_units = j.value("max_context_units", c.max_context_units);
        if (j.contains("max_tokens")) c.max_tokens = j.at("max_tokens").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("remote backend: ") + e.what());
    }
    c.validate();
    return c;
}

json build_chat_request(const RemoteConfig& cfg, const CompletionRequest& request) {
    json messages = json::array({{{"role", "user"}, {"content", request.prompt}}});
    if (!request.transcript.empty()) {
        messages.push_back({{"role", "assistant"}, {"content", request.transcript}});
    }
    json body{{"model", cfg.model}, {"messages", messages}, {"temperature", request.temperature}};
    if (!request.stop.empty() && cfg.supports_stop_sequences) body["stop"] = request.stop;
    if (cfg.max_tokens) body["max_tokens"] = *cfg.max_tokens;
    return body;
}

Completion parse_chat_response(std::string_view body) {
    const auto j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ResponseSchemaError, "reply is not JSON");
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw Error(ErrorCode::ResponseSchemaError, "reply has no choices");
    }
    const auto& choice = j["choices"][0];
    if (!choice.is_object()) throw Error(ErrorCode::ResponseSchemaError, "choice is not an object");

    Completion c;
    const json* content = nullptr;
    if (choice.contains("message") && choice["message"].is_object() && choice["message"].contains("content")) {
        content = &choice["message"]["content"];
    } else if (choice.contains("text")) {
        content = &choice["text"];
    }
    if (content == nullptr) throw Error(ErrorCode::ResponseSchemaError, "choice carries no text");
    if (content->is_string()) {
        c.text = content->get<std::string>();
    } else if (!content->is_null()) {
        throw Error(ErrorCode::ResponseSchemaError, "choice text is not a string");
    }

    const auto reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                            ? choice["finish_reason"].get<std::string>()
                            : std::string("stop");
    if (reason == "length") {
        c.finish = FinishReason::Length;
    } else if (reason == "stop") {
        c.finish = FinishReason::Stop;
    } else {
        c.finish = FinishReason::EndOfText;
    }
    // some servers name the stop sequence that fired
    if (choice.contains("stop_reason") && choice["stop_reason"].is_string()) {
        c.matched_stop = choice["stop_reason"].get<std::string>();
    }
    return c;
}

RemoteBackend::RemoteBackend(RemoteConfig cfg, Sleeper sleeper) : cfg_(std::move(cfg)), sleep_(std::move(sleeper)) {
    cfg_.validate();
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    const auto scheme_end = cfg_.base_url.find("://") + 3;
    const auto slash = cfg_.base_url.find('/', scheme_end);
    origin_ = cfg_.base_url.substr(0, slash);
    std::string prefix = slash == std::string::npos ? "" : cfg_.base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix + "/v1/chat/completions";
}

BackendCapabilities RemoteBackend::capabilities() const {
    return {cfg_.supports_stop_sequences, cfg_.max_context_units};
}

int RemoteBackend::last_attempts() noexcept {
    return g_last_attempts;
}

Completion RemoteBackend::complete(const CompletionRequest& request) {
    httplib::Headers headers;
    if (!cfg_.api_key_env.empty()) {
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw Error(ErrorCode::AuthenticationFailed, "environment variable " + cfg_.api_key_env + " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = build_chat_request(cfg_, request).dump();

    // one client per call keeps concurrent rollouts independent
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    std::string last_error;
    auto delay = cfg_.backoff_initial;
    g_last_attempts = 0;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleep_(delay);
            delay = std::min(delay * 2, cfg_.backoff_max);
        }
        ++g_last_attempts;
        const auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw Error(ErrorCode::AuthenticationFailed, "endpoint rejected credentials (HTTP " +
                                                             std::to_string(res->status) + ")");
        }
        if (res->status >= 200 && res->status < 300) return parse_chat_response(res->body);
        last_error = "HTTP " + std::to_string(res->status);
        if (!retryable(res->status)) {
            throw Error(ErrorCode::BackendUnavailable, last_error + " is not retryable");
        }
    }
    throw Error(ErrorCode::BackendUnavailable,
                "giving up after " + std::to_string(g_last_attempts) + " attempt(s): " + last_error);
}

}  // namespace tir
