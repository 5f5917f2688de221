// SPDX-License-Identifier: Apache-2.0
//
// Chat-completions client used as a policy backend.

#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "json.hpp"
#include "tir/backend.hpp"

namespace tir {

struct RemoteConfig {
    std::string base_url;            // scheme://host[:port][/prefix]
    std::string model;
    std::string api_key_env;         // name of the variable holding the key; empty for none
    int max_retries = 3;             // extra attempts after the first
    std::chrono::milliseconds backoff_initial{200};
    std::chrono::milliseconds backoff_max{5000};
    std::chrono::milliseconds timeout{60000};
    bool supports_stop_sequences = true;
    std::size_t max_context_units = 32768;
    std::optional<int> max_tokens;

    void validate() const;  // throws InvalidConfig
};

RemoteConfig remote_config_from_json(const nlohmann::json& j);

/// Request body for one completion.
nlohmann::json build_chat_request(const RemoteConfig& cfg, const CompletionRequest& request);

/// Reads choices[0] from a reply. Throws ResponseSchemaError.
Completion parse_chat_response(std::string_view body);

/// Retries connection failures, 408, 429 and 5xx with exponential backoff.
/// 401 and 403 raise AuthenticationFailed, other statuses BackendUnavailable
/// without retrying, as does running out of attempts.
class RemoteBackend final : public PolicyBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit RemoteBackend(RemoteConfig cfg, Sleeper sleeper = {});

    BackendCapabilities capabilities() const override;
    Completion complete(const CompletionRequest& request) override;

    /// Attempts made by the most recent complete() call on this thread.
    static int last_attempts() noexcept;

private:
    RemoteConfig cfg_;
    Sleeper sleep_;
    std::string origin_;  // scheme://host:port
    std::string path_;    // prefix + /v1/chat/completions
};

}  // namespace tir
