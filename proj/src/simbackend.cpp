// SPDX-License-Identifier: Apache-2.0
#include "prunepath/simbackend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "prunepath/error.hpp"
#include "prunepath/random.hpp"

namespace prunepath {

namespace {

// Spread of z for a uniform Beta(1,1) draw; keeps the confidence mixing on
// the same scale as z.
constexpr double kLatentScale = 1.8;
constexpr int kTokenPoolSize = 64;
// Per-token negative log-probability level is kLogprobLevel * (1 - kLogprobSlope * u), floored.
// Linear so that mean logprob tracks z across the whole clamped range of z.
constexpr double kLogprobLevel = 0.5;
constexpr double kLogprobSlope = 0.03;
constexpr double kLogprobFloor = 0.01;


double draw_beta(Rng& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y == 0.0) return 0.5;
    return x / (x + y);
}

std::int64_t lognormal_length(Rng& rng, double median, double sigma) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double v = median * std::exp(sigma * n(rng));
    return std::max<std::int64_t>(1, std::llround(v));
}

}  // namespace

void SimConfig::validate() const {
    if (feature_dim == 0) throw ConfigError("sim.feature_dim must be positive");
    if (informative_features > feature_dim) {
        throw ConfigError("sim.informative_features must not exceed feature_dim");
    }
    if (vocab_size < 1) throw ConfigError("sim.vocab_size must be positive");
    if (!(length_mean >= 1.0)) throw ConfigError("sim.length_mean must be >= 1");
    if (!(length_sigma >= 0.0)) throw ConfigError("sim.length_sigma must be nonnegative");
    if (!(difficulty_alpha > 0.0) || !(difficulty_beta > 0.0)) {
        throw ConfigError("sim.difficulty_alpha/beta must be positive");
    }
    if (!(path_concentration > 0.0)) throw ConfigError("sim.path_concentration must be positive");
    if (!(confidence_miscalibration >= 0.0 && confidence_miscalibration <= 1.0)) {
        throw ConfigError("sim.confidence_miscalibration must lie in [0,1]");
    }
    if (!(feature_noise >= 0.0)) throw ConfigError("sim.feature_noise must be nonnegative");
    if (distractor_count < 1) throw ConfigError("sim.distractor_count must be positive");
    if (!(judge_noise >= 0.0)) throw ConfigError("sim.judge_noise must be nonnegative");
}

double success_probability(double latent_quality) {
    const double s = 1.0 / (1.0 + std::exp(-latent_quality));
    return kSuccessEpsilon + (1.0 - 2.0 * kSuccessEpsilon) * s;
}

double latent_from_success(double success_prob) {
    const double s = (success_prob - kSuccessEpsilon) / (1.0 - 2.0 * kSuccessEpsilon);
    if (!(s > 0.0 && s < 1.0)) throw ArgumentError("success probability outside (eps, 1-eps)");
    return std::log(s / (1.0 - s));
}

std::vector<QueryRecord> sample_queries(const SimConfig& config, std::size_t count,
                                        std::string_view id_prefix) {
    config.validate();
    std::vector<QueryRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%05zu", i);
        QueryRecord q;
        q.query_id = std::string(id_prefix) + id;
        Rng rng = stream(config.seed, q.query_id, 0, Stage::query);
        q.base_success_prob = draw_beta(rng, config.difficulty_alpha, config.difficulty_beta);
        q.task_length_ref = lognormal_length(rng, config.length_mean, config.length_sigma);
        q.gold_answer = std::to_string(std::uniform_int_distribution<int>(0, 999)(rng));
        q.prompt = "Simulated problem " + q.query_id +
                   "\nPlease reason step by step, and put your final answer within \\boxed{}.";
        out.push_back(std::move(q));
    }
    return out;
}

SimBackend::SimBackend(SimConfig config) : config_(config) {
    config_.validate();
    Rng rng = stream(config_.seed, "__feature_map__", 0, Stage::features);
    std::uniform_real_distribution<double> slope(0.5, 1.5);
    std::normal_distribution<double> offset(0.0, 0.5);
    std::bernoulli_distribution flip(0.5);
    for (std::size_t j = 0; j < config_.informative_features; ++j) {
        const double s = slope(rng);
        feature_slope_.push_back(flip(rng) ? -s : s);
        feature_offset_.push_back(offset(rng));
    }
}

SimBackend::Latents SimBackend::latents(const QueryRecord& query, int path_id) const {
    Rng rng = stream(config_.seed, query.query_id, path_id, Stage::launch, 0);
    const double p = std::clamp(query.base_success_prob.value_or(0.5), 1e-6, 1.0 - 1e-6);
    const double kappa = config_.path_concentration;
    const double s = std::clamp(draw_beta(rng, kappa * p, kappa * (1.0 - p)), 1e-12, 1.0 - 1e-12);
    Latents out;
    out.z = std::log(s / (1.0 - s));
    out.success = success_probability(out.z);
    std::normal_distribution<double> n(0.0, 1.0);
    const double m = config_.confidence_miscalibration;
    out.confidence = (1.0 - m) * out.z + m * kLatentScale * n(rng);
    out.total_length = lognormal_length(rng, static_cast<double>(query.task_length_ref),
                                        config_.length_sigma);
    return out;
}

std::vector<std::string> SimBackend::distractors(const QueryRecord& query) const {
    std::vector<std::string> out;
    const std::string gold(trim(query.gold_answer));
    const std::uint64_t base = fnv1a(query.query_id);
    for (int d = 1; d <= config_.distractor_count; ++d) {
        std::uint64_t v = mix(base, static_cast<std::uint64_t>(d)) % 1000;
        std::string candidate = std::to_string(v);
        if (candidate == gold) candidate = std::to_string((v + 1) % 1000);
        out.push_back(std::move(candidate));
    }
    return out;
}

PathRecord SimBackend::launch_prefix(const QueryRecord& query, int path_id,
                                     std::int64_t prefix_length) {
    if (prefix_length < 1) throw ArgumentError("launch_prefix: prefix_length must be >= 1");
    const Latents lat = latents(query, path_id);

    PathRecord path;
    path.query_id = query.query_id;
    path.path_id = path_id;
    path.latent_quality = lat.z;
    path.success_prob = lat.success;

    const std::int64_t n_tokens = std::min(prefix_length, lat.total_length);
    path.finished_early = lat.total_length <= prefix_length;
    path.tokens.resize(static_cast<std::size_t>(n_tokens));
    path.token_logprobs.resize(static_cast<std::size_t>(n_tokens));

    Rng rng = stream(config_.seed, query.query_id, path_id, Stage::launch, 1);
    const std::uint64_t pool_seed = fnv1a(query.query_id);
    std::bernoulli_distribution from_pool(0.5);
    std::uniform_int_distribution<int> pool_index(0, kTokenPoolSize - 1);
    std::uniform_int_distribution<TokenId> any_token(0, config_.vocab_size - 1);
    std::exponential_distribution<double> surprise(1.0);
    const double level = std::max(kLogprobFloor, kLogprobLevel * (1.0 - kLogprobSlope * lat.confidence));
    for (std::int64_t t = 0; t < n_tokens; ++t) {
        TokenId tok;
        if (from_pool(rng)) {
            tok = static_cast<TokenId>(mix(pool_seed, static_cast<std::uint64_t>(pool_index(rng))) %
                                       static_cast<std::uint64_t>(config_.vocab_size));
        } else {
            tok = any_token(rng);
        }
        path.tokens[static_cast<std::size_t>(t)] = tok;
        path.token_logprobs[static_cast<std::size_t>(t)] = -level * surprise(rng);
    }
    path.prefix_tokens = n_tokens;
    path.token_count = n_tokens;

    std::vector<double> features(config_.feature_dim);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t j = 0; j < config_.feature_dim; ++j) {
        const double noise = n(rng);
        if (j < config_.informative_features) {
            features[j] = feature_slope_[j] * lat.z + feature_offset_[j] + config_.feature_noise * noise;
        } else {
            features[j] = noise;
        }
    }
    path.checkpoint_features = std::move(features);
    path.status = PathStatus::launched;
    return path;
}

PathRecord SimBackend::resume_path(const PathRecord& path, const QueryRecord& query,
                                   std::uint64_t draw) {
    if (path.status != PathStatus::launched) {
        throw LifecycleError("resume_path: path " + path.query_id + "/" + std::to_string(path.path_id) +
                             " is " + std::string(to_string(path.status)));
    }
    if (!path.success_prob) throw ArgumentError("resume_path: path carries no simulator latent");

    Rng rng = stream(config_.seed, query.query_id, path.path_id, Stage::resume, draw);
    PathRecord out = path;

    std::int64_t residual = 0;
    if (!path.finished_early) {
        if (draw == 0) {
            residual = std::max<std::int64_t>(1, latents(query, path.path_id).total_length - path.prefix_tokens);
        } else {
            const std::int64_t total = lognormal_length(rng, static_cast<double>(query.task_length_ref),
                                                        config_.length_sigma);
            residual = std::max<std::int64_t>(1, total - path.prefix_tokens);
        }
    }

    const bool correct = std::bernoulli_distribution(std::clamp(*path.success_prob, 0.0, 1.0))(rng);
    if (correct) {
        out.answer = query.gold_answer;
    } else {
        std::vector<double> weights;
        for (int d = 1; d <= config_.distractor_count; ++d) {
            weights.push_back(std::pow(static_cast<double>(d), -config_.distractor_zipf));
        }
        std::discrete_distribution<int> pick(weights.begin(), weights.end());
        out.answer = distractors(query)[static_cast<std::size_t>(pick(rng))];
    }
    out.is_correct = answers_match(*out.answer, query.gold_answer);

    if (config_.materialize_completions && residual > 0) {
        std::uniform_int_distribution<TokenId> any_token(0, config_.vocab_size - 1);
        std::exponential_distribution<double> surprise(2.0);
        out.tokens.reserve(out.tokens.size() + static_cast<std::size_t>(residual));
        for (std::int64_t t = 0; t < residual; ++t) {
            out.tokens.push_back(any_token(rng));
            out.token_logprobs.push_back(-surprise(rng));
        }
    }
    out.token_count = path.token_count + residual;
    out.status = PathStatus::completed;
    return out;
}

std::vector<PathRecord> SimBackend::rollout_from_prefix(const PathRecord& path,
                                                        const QueryRecord& query, int rollouts,
                                                        std::uint64_t draw) {
    if (rollouts <= 0) throw ArgumentError("rollout_from_prefix: rollout count must be positive");
    // Rollouts share the prefix; unless completions are materialized they keep
    // only the counts, so large K does not copy the prefix stream K times.
    PathRecord shell;
    const PathRecord* base = &path;
    if (!config_.materialize_completions) {
        shell = path;
        shell.tokens = {};
        shell.token_logprobs = {};
        base = &shell;
    }
    std::vector<PathRecord> out;
    out.reserve(static_cast<std::size_t>(rollouts));
    for (int j = 0; j < rollouts; ++j) out.push_back(resume_path(*base, query, rollout_draw(draw, j)));
    return out;
}

}  // namespace prunepath
