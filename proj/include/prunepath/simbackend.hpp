// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prunepath/backend.hpp"
#include "prunepath/core.hpp"

namespace prunepath {

/// Knobs of the synthetic trajectory generator.
///
/// Each path carries a latent quality z. Its success probability is
/// q(z) = eps + (1 - 2 eps) * logistic(z), so q is strictly increasing in z and
/// never hits 0 or 1. z is drawn so that logistic(z) ~ Beta(kappa p, kappa (1-p))
/// where p is the query's base success probability and kappa is
/// `path_concentration`; smaller kappa spreads paths of one query further apart.
struct SimConfig {
    std::uint64_t seed = 0;
    std::size_t feature_dim = 16;
    // Leading feature dimensions that carry an affine image of z; the rest
    // are nuisance noise.
    std::size_t informative_features = 4;
    int vocab_size = 32000;
    // Median of the reference task length, and the lognormal spread used both
    // across queries and across paths of a query.
    double length_mean = 8650.0;
    double length_sigma = 0.3;
    double difficulty_alpha = 1.0;
    double difficulty_beta = 1.0;
    double path_concentration = 2.0;
    // 0: token log-probabilities track z; 1: they carry no information on z.
    double confidence_miscalibration = 0.5;
    double feature_noise = 0.5;
    int distractor_count = 8;
    double distractor_zipf = 1.2;
    double judge_noise = 0.1;
    // Materialize completion tokens on resume. Off by default: completions
    // are only counted, which keeps large sweeps in memory.
    bool materialize_completions = false;

    void validate() const;
};

inline constexpr double kSuccessEpsilon = 1e-3;

double success_probability(double latent_quality);
double latent_from_success(double success_prob);

std::vector<QueryRecord> sample_queries(const SimConfig& config, std::size_t count,
                                        std::string_view id_prefix = "q");

class SimBackend final : public TrajectoryBackend {
public:
    explicit SimBackend(SimConfig config);

    std::string_view name() const override { return "sim"; }

    PathRecord launch_prefix(const QueryRecord& query, int path_id,
                             std::int64_t prefix_length) override;

    /// Draws the answer with probability path.success_prob of being gold.
    PathRecord resume_path(const PathRecord& path, const QueryRecord& query,
                           std::uint64_t draw = 0) override;

    /// Rollout j of call `draw` equals resume_path(path, query, rollout_draw(draw, j)).
    std::vector<PathRecord> rollout_from_prefix(const PathRecord& path, const QueryRecord& query,
                                                int rollouts, std::uint64_t draw = 0) override;

    static std::uint64_t rollout_draw(std::uint64_t draw, int index) {
        return ((draw + 1) << 32) + static_cast<std::uint64_t>(index);
    }

    const SimConfig& config() const { return config_; }

    /// Distractor answers of a query, most likely first.
    std::vector<std::string> distractors(const QueryRecord& query) const;

private:
    struct Latents {
        double z = 0.0;
        double success = 0.5;
        double confidence = 0.0;
        std::int64_t total_length = 1;
    };
    Latents latents(const QueryRecord& query, int path_id) const;

    SimConfig config_;
    std::vector<double> feature_slope_;
    std::vector<double> feature_offset_;
};

}  // namespace prunepath
