// SPDX-License-Identifier: Apache-2.0
#include "prunepath/llm_client.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

#include "prunepath/random.hpp"

namespace prunepath {

using nlohmann::json;

void EndpointConfig::validate() const {
    if (base_url.rfind("http://", 0) != 0) {
        throw ConfigError("endpoint.base_url must start with http:// (TLS is not built in)");
    }
    if (model_name.empty()) throw ConfigError("endpoint.model_name must be set");
    if (retries < 0) throw ConfigError("endpoint.retries must be >= 0");
    if (backoff_ms < 0) throw ConfigError("endpoint.backoff_ms must be >= 0");
    if (max_in_flight < 1 || max_in_flight > 1024) throw ConfigError("endpoint.max_in_flight must lie in [1, 1024]");
    if (!(timeout_seconds > 0.0)) throw ConfigError("endpoint.timeout_seconds must be positive");
    if (!(temperature >= 0.0)) throw ConfigError("endpoint.temperature must be nonnegative");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("endpoint.top_p must lie in (0,1]");
    if (resume_max_tokens < 1) throw ConfigError("endpoint.resume_max_tokens must be positive");
}

namespace {

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(const EndpointConfig& config) {
        // Split http://host:port/prefix into the client origin and path prefix.
        const std::string rest = config.base_url.substr(7);
        const auto slash = rest.find('/');
        origin_ = "http://" + rest.substr(0, slash);
        if (slash != std::string::npos) prefix_ = rest.substr(slash);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        timeout_ = config.timeout_seconds;
    }

    HttpReply post(const std::string& path, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) override {
        httplib::Client cli(origin_);
        const auto secs = static_cast<time_t>(timeout_);
        const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = cli.Post(prefix_ + path, h, body, "application/json");
        if (!res) throw TransportError("POST " + origin_ + prefix_ + path + ": " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }

private:
    std::string origin_;
    std::string prefix_;
    double timeout_ = 120.0;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const EndpointConfig& config) {
    config.validate();
    return std::make_unique<HttpTransport>(config);
}

FixtureTransport::FixtureTransport(const json& fixture) {
    if (!fixture.contains("replies") || !fixture["replies"].is_array()) {
        throw ConfigError("fixture: expected an object with a 'replies' array");
    }
    for (const auto& r : fixture["replies"]) replies_.push_back(r);
}

HttpReply FixtureTransport::post(const std::string& path, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers) {
    std::lock_guard lock(mutex_);
    json req = {{"path", path}, {"body", json::parse(body)}};
    for (const auto& [k, v] : headers) {
        if (k != "Authorization") req["headers"][k] = v;
    }
    requests_.push_back(std::move(req));
    if (replies_.empty()) throw TransportError("fixture exhausted at request " + std::to_string(requests_.size()));
    json reply = replies_.front();
    replies_.pop_front();
    if (reply.contains("error")) throw TransportError("fixture: " + reply["error"].get<std::string>());
    const json& b = reply.at("body");
    return {reply.value("status", 200), b.is_string() ? b.get<std::string>() : b.dump()};
}

std::vector<json> FixtureTransport::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::size_t FixtureTransport::remaining() const {
    std::lock_guard lock(mutex_);
    return replies_.size();
}

std::vector<double> logprob_features(std::span<const double> lp) {
    std::vector<double> f(kLogprobFeatureDim, 0.0);
    if (lp.empty()) return f;
    const double n = static_cast<double>(lp.size());
    double sum = 0.0;
    double sq = 0.0;
    double below = 0.0;
    for (double v : lp) {
        sum += v;
        sq += v * v;
        below += v < -2.0 ? 1.0 : 0.0;
    }
    const double mean = sum / n;
    auto window_min = [&](std::size_t w) {
        w = std::min(w, lp.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < w; ++i) acc += lp[i];
        double best = acc;
        for (std::size_t i = w; i < lp.size(); ++i) {
            acc += lp[i] - lp[i - w];
            best = std::min(best, acc);
        }
        return best / static_cast<double>(w);
    };
    const std::size_t tail = std::min<std::size_t>(64, lp.size());
    double tail_sum = 0.0;
    for (std::size_t i = lp.size() - tail; i < lp.size(); ++i) tail_sum += lp[i];
    f[0] = mean;
    f[1] = *std::min_element(lp.begin(), lp.end());
    f[2] = window_min(16);
    f[3] = window_min(64);
    f[4] = std::sqrt(std::max(0.0, sq / n - mean * mean));
    f[5] = below / n;
    f[6] = std::log1p(n);
    f[7] = tail_sum / static_cast<double>(tail);
    return f;
}

std::optional<std::string> extract_answer(std::string_view text) {
    const auto pos = text.rfind("\\boxed{");
    if (pos != std::string_view::npos) {
        int depth = 1;
        const std::size_t start = pos + 7;
        for (std::size_t i = start; i < text.size(); ++i) {
            if (text[i] == '{') ++depth;
            if (text[i] == '}' && --depth == 0) return std::string(trim(text.substr(start, i - start)));
        }
    }
    static const std::regex field(R"re("ANSWER"\s*:\s*"([^"]*)")re");
    std::string last;
    bool found = false;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), field); it != std::sregex_iterator(); ++it) {
        last = (*it)[1].str();
        found = true;
    }
    if (found) return std::string(trim(last));
    return std::nullopt;
}

TokenId token_id(std::string_view token) { return static_cast<TokenId>(fnv1a(token) & 0x7fffffffu); }

CompletionClient::CompletionClient(EndpointConfig config, std::unique_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), in_flight_(config_.max_in_flight) {
    config_.validate();
    if (!transport_) throw ArgumentError("CompletionClient needs a transport");
    if (!config_.api_key_env_var.empty()) {
        const char* key = std::getenv(config_.api_key_env_var.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("endpoint: environment variable " + config_.api_key_env_var + " is not set");
        }
        api_key_ = key;
    }
}

Completion CompletionClient::complete(const std::string& prompt, std::int64_t max_tokens) {
    const json request = {{"model", config_.model_name}, {"prompt", prompt},         {"max_tokens", max_tokens},
                          {"temperature", config_.temperature}, {"top_p", config_.top_p}, {"top_k", config_.top_k},
                          {"logprobs", 1}};
    std::vector<std::pair<std::string, std::string>> headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    const std::string body = request.dump();

    HttpReply reply;
    for (int attempt = 0;; ++attempt) {
        std::string failure;
        {
            in_flight_.acquire();
            try {
                reply = transport_->post("/v1/completions", body, headers);
            } catch (const TransportError& e) {
                failure = e.what();
            }
            in_flight_.release();
        }
        if (failure.empty() && (reply.status == 429 || reply.status >= 500)) {
            failure = "HTTP " + std::to_string(reply.status);
        }
        if (failure.empty()) break;
        if (attempt >= config_.retries) {
            throw TransportError(config_.base_url + ": giving up after " + std::to_string(attempt + 1) +
                                 " attempts: " + failure);
        }
        ++retries_used_;
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << attempt));
    }

    json doc;
    try {
        doc = json::parse(reply.body);
    } catch (const json::exception& e) {
        throw TransportError(config_.base_url + ": unparseable reply: " + e.what());
    }
    if (reply.status != 200) {
        std::string message = reply.body;
        if (doc.contains("error")) {
            const auto& err = doc["error"];
            message = err.is_object() ? err.value("message", err.dump()) : err.dump();
        }
        std::string lower = message;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (lower.find("context") != std::string::npos) {
            throw TruncationError(config_.base_url + ": context length exceeded: " + message, {});
        }
        throw TransportError(config_.base_url + ": HTTP " + std::to_string(reply.status) + ": " + message);
    }
    try {
        const auto& choice = doc.at("choices").at(0);
        Completion out;
        out.text = choice.value("text", "");
        out.finish_reason = choice.value("finish_reason", "");
        if (!choice.contains("logprobs") || choice["logprobs"].is_null() ||
            !choice["logprobs"].contains("token_logprobs")) {
            throw CapabilityError("endpoint " + config_.base_url + " (" + config_.model_name +
                                  ") returned no per-token logprobs");
        }
        const auto& lp = choice["logprobs"];
        out.tokens = lp.at("tokens").get<std::vector<std::string>>();
        for (const auto& v : lp["token_logprobs"]) out.logprobs.push_back(v.is_null() ? 0.0 : v.get<double>());
        if (out.tokens.size() != out.logprobs.size()) {
            throw CapabilityError("endpoint " + config_.base_url + " returned misaligned tokens and logprobs");
        }
        return out;
    } catch (const json::exception& e) {
        throw TransportError(config_.base_url + ": malformed completion: " + e.what());
    }
}

HttpBackend::HttpBackend(EndpointConfig config, std::unique_ptr<Transport> transport)
    : client_(std::move(config), std::move(transport)) {}

PathRecord HttpBackend::launch_prefix(const QueryRecord& query, int path_id, std::int64_t prefix_length) {
    if (prefix_length < 1) throw ArgumentError("launch_prefix: prefix_length must be >= 1");
    const Completion c = client_.complete(query.prompt, prefix_length);
    PathRecord p;
    p.query_id = query.query_id;
    p.path_id = path_id;
    p.text = c.text;
    for (const auto& t : c.tokens) p.tokens.push_back(token_id(t));
    p.token_logprobs = c.logprobs;
    p.prefix_tokens = static_cast<std::int64_t>(c.tokens.size());
    p.token_count = p.prefix_tokens;
    p.finished_early = c.finish_reason == "stop";
    p.checkpoint_features = logprob_features(p.token_logprobs);
    p.status = PathStatus::launched;
    return p;
}

PathRecord HttpBackend::resume_path(const PathRecord& path, const QueryRecord& query, std::uint64_t /*draw*/) {
    if (path.status != PathStatus::launched) {
        throw LifecycleError("resume_path: path " + path.query_id + "/" + std::to_string(path.path_id) + " is " +
                             std::string(to_string(path.status)));
    }
    PathRecord out = path;
    if (!path.finished_early) {
        Completion c;
        try {
            c = client_.complete(query.prompt + path.text, client_.config().resume_max_tokens);
        } catch (const TruncationError& e) {
            throw TruncationError(e.what(), path);
        }
        out.text += c.text;
        for (const auto& t : c.tokens) out.tokens.push_back(token_id(t));
        out.token_logprobs.insert(out.token_logprobs.end(), c.logprobs.begin(), c.logprobs.end());
        out.token_count = path.token_count + static_cast<std::int64_t>(c.tokens.size());
        if (c.finish_reason == "length") {
            throw TruncationError("resume_path: " + path.query_id + "/" + std::to_string(path.path_id) +
                                      " hit max_tokens before finishing",
                                  out);
        }
    }
    out.answer = extract_answer(out.text).value_or("");
    out.is_correct = !out.answer->empty() && answers_match(*out.answer, query.gold_answer);
    out.status = PathStatus::completed;
    return out;
}

std::vector<PathRecord> HttpBackend::rollout_from_prefix(const PathRecord& path, const QueryRecord& query,
                                                         int rollouts, std::uint64_t draw) {
    if (rollouts <= 0) throw ArgumentError("rollout_from_prefix: rollout count must be positive");
    std::vector<PathRecord> out;
    for (int j = 0; j < rollouts; ++j) out.push_back(resume_path(path, query, draw));
    return out;
}

HttpJudge::HttpJudge(CompletionClient& client, std::string instruction)
    : client_(client), instruction_(std::move(instruction)) {
    if (instruction_.empty()) {
        instruction_ =
            "\n\nEstimate the probability that the partial solution above reaches the correct final answer. "
            "Reply with a single number between 0 and 1.\nProbability:";
    }
}

double HttpJudge::evaluate(const PathRecord& prefix) {
    const Completion c = client_.complete(prefix.text + instruction_, 8);
    static const std::regex number(R"([-+]?[0-9]*\.?[0-9]+)");
    std::smatch m;
    if (!std::regex_search(c.text, m, number)) {
        throw NumericError("judge reply carries no number: '" + c.text + "'");
    }
    return std::stod(m[0].str());
}

}  // namespace prunepath
