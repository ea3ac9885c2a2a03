// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunepath/backend.hpp"
#include "prunepath/error.hpp"
#include "prunepath/signals.hpp"

namespace prunepath {

inline constexpr const char* kMathPromptSuffix =
    "Please reason step by step, and put your final answer within \\boxed{}.";
inline constexpr const char* kChoicePromptSuffix =
    "Please show your choice in the answer field with only the choice letter, e.g., \"ANSWER\": \"C\".";

struct EndpointConfig {
    // http://host:port, optionally with a path prefix.
    std::string base_url;
    std::string model_name;
    // Name of the environment variable holding the key. Empty: no
    // Authorization header (local servers).
    std::string api_key_env_var = "PRUNEPATH_API_KEY";
    double temperature = 0.6;
    double top_p = 0.95;
    int top_k = 40;
    // Cap on the continuation after the checkpoint.
    std::int64_t resume_max_tokens = 32768;
    double timeout_seconds = 120.0;
    int retries = 2;
    int backoff_ms = 500;
    int max_in_flight = 8;

    void validate() const;
};

/// Thrown when the endpoint cut a generation short (context overflow or
/// max_tokens on resume). `partial` holds what was generated so far.
class TruncationError : public Error {
public:
    TruncationError(const std::string& what, PathRecord partial) : Error(what), partial(std::move(partial)) {}
    PathRecord partial;
};

struct HttpReply {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// POST a JSON body. Throws TransportError when no reply arrived.
    virtual HttpReply post(const std::string& path, const std::string& body,
                           const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

std::unique_ptr<Transport> make_http_transport(const EndpointConfig& config);

/// Replays recorded replies in order and records every request.
///
/// Fixture document: {"replies": [{"status": 200, "body": {...}} | {"error": "timeout"}, ...]}
class FixtureTransport final : public Transport {
public:
    explicit FixtureTransport(const nlohmann::json& fixture);
    HttpReply post(const std::string& path, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) override;
    std::vector<nlohmann::json> requests() const;
    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::deque<nlohmann::json> replies_;
    std::vector<nlohmann::json> requests_;
};

struct Completion {
    std::string text;
    std::vector<std::string> tokens;
    std::vector<double> logprobs;
    std::string finish_reason;
};

/// Checkpoint features from log-probabilities alone: mean, min, minimum
/// sliding-window means (16 and 64), standard deviation, share of tokens below
/// log p = -2, log(1 + length), mean of the last 64 tokens.
inline constexpr std::size_t kLogprobFeatureDim = 8;
std::vector<double> logprob_features(std::span<const double> logprobs);

/// Content of the last \boxed{...}, else the "ANSWER": "X" field.
std::optional<std::string> extract_answer(std::string_view text);

/// Stable id for a token string, so token-set signals work over the wire.
TokenId token_id(std::string_view token);

class CompletionClient {
public:
    CompletionClient(EndpointConfig config, std::unique_ptr<Transport> transport);
    const EndpointConfig& config() const { return config_; }
    /// One /v1/completions call with retries on transport failure, 429 and 5xx.
    Completion complete(const std::string& prompt, std::int64_t max_tokens);
    int retries_used() const { return retries_used_.load(); }

private:
    EndpointConfig config_;
    std::unique_ptr<Transport> transport_;
    std::string api_key_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<int> retries_used_{0};
};

/// Launch/resume over a stateless completion endpoint. The prefix is
/// re-submitted on resume; its length is charged as resume overhead.
class HttpBackend final : public TrajectoryBackend {
public:
    HttpBackend(EndpointConfig config, std::unique_ptr<Transport> transport);
    std::string_view name() const override { return "endpoint"; }
    PathRecord launch_prefix(const QueryRecord& query, int path_id, std::int64_t prefix_length) override;
    PathRecord resume_path(const PathRecord& path, const QueryRecord& query, std::uint64_t draw = 0) override;
    std::vector<PathRecord> rollout_from_prefix(const PathRecord& path, const QueryRecord& query, int rollouts,
                                                std::uint64_t draw = 0) override;
    std::uint64_t resume_overhead_tokens(const PathRecord& launched) const override {
        return static_cast<std::uint64_t>(launched.prefix_tokens);
    }
    CompletionClient& client() { return client_; }

private:
    CompletionClient client_;
};

/// Judge that asks the endpoint for a probability and parses the first number
/// of the reply.
class HttpJudge final : public Judge {
public:
    HttpJudge(CompletionClient& client, std::string instruction = {});
    double evaluate(const PathRecord& prefix) override;

private:
    CompletionClient& client_;
    std::string instruction_;
};

}  // namespace prunepath
