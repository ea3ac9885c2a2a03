// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prunepath/core.hpp"

namespace prunepath {

// heuristic/judge/confidence/learned are the four generator families; oracle
// and random are controls that bracket them on the simulator.
enum class GeneratorKind { heuristic, judge, confidence, learned, oracle, random };

std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view name);

struct SignalScore {
    int path_id = 0;
    double value = 0.0;
    GeneratorKind generator_kind = GeneratorKind::confidence;
    std::uint64_t check_cost_tokens = 0;
};

/// Learnable prefix scorer: standardize, optional tanh adapter layer, linear
/// head, logistic.
///
///   h = tanh(W^T x' + b)        (adapter, W is F x H row-major)
///   logit = v . h + c           (or v . x' + c without the adapter)
///
/// where x' = (x - input_mean) / input_scale.
struct ScorerModel {
    std::size_t feature_dim = 0;
    std::size_t hidden_width = 0;
    bool use_adapter = true;
    std::vector<double> input_mean;
    std::vector<double> input_scale;
    std::vector<double> adapter_weights;
    std::vector<double> adapter_bias;
    std::vector<double> head_weights;
    double head_bias = 0.0;

    /// Zero-parameter model with identity standardization.
    static ScorerModel zeros(std::size_t feature_dim, std::size_t hidden_width, bool use_adapter);

    std::size_t parameter_count() const;
    std::size_t head_inputs() const { return use_adapter ? hidden_width : feature_dim; }

    // Throws ConfigError on inconsistent shapes, NumericError on non-finite values.
    void validate() const;

    double logit(std::span<const double> features) const;
    double probability(std::span<const double> features) const;

    // Trainable parameters in a fixed order: adapter weights, adapter bias,
    // head weights, head bias.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);
};

struct HeuristicOptions {
    // Jaccard unit: 1 compares unigram sets, w > 1 compares w-gram sets.
    int ngram = 1;
    // One token-equivalent of check cost per chunk of this many prefix tokens.
    std::int64_t chunk_tokens = 128;
};

struct ConfidenceOptions {
    // 0 selects the geometric-mean probability; w > 0 selects the minimum
    // over sliding windows of width w of the mean window log-probability.
    std::int64_t window = 0;
};

struct LearnedOptions {
    std::uint64_t super_tokens = 6;
};

std::vector<SignalScore> score_heuristic(std::span<const PathRecord> prefixes,
                                         const HeuristicOptions& options = {});

SignalScore score_confidence(const PathRecord& prefix, const ConfidenceOptions& options = {});

/// External judge of a prefix. Returned values may fall outside [0,1];
/// score_judge clamps them.
class Judge {
public:
    virtual ~Judge() = default;
    virtual double evaluate(const PathRecord& prefix) = 0;
};

/// Simulator judge: true success probability plus Gaussian noise with a
/// per-path deterministic stream.
class SimulatedJudge final : public Judge {
public:
    SimulatedJudge(std::uint64_t seed, double noise) : seed_(seed), noise_(noise) {}
    double evaluate(const PathRecord& prefix) override;

private:
    std::uint64_t seed_;
    double noise_;
};

SignalScore score_judge(const PathRecord& prefix, Judge& judge);

SignalScore score_learned(const PathRecord& prefix, const ScorerModel& model,
                          const LearnedOptions& options = {});

/// Scores for all prefixes of one query, in input order.
class SignalGenerator {
public:
    virtual ~SignalGenerator() = default;
    virtual GeneratorKind kind() const = 0;
    virtual std::vector<SignalScore> score(std::span<const PathRecord> prefixes) = 0;
};

struct GeneratorSettings {
    GeneratorKind kind = GeneratorKind::learned;
    HeuristicOptions heuristic;
    ConfidenceOptions confidence;
    LearnedOptions learned;
    std::uint64_t random_seed = 0;
};

/// Builds the generator for `settings`. `model` is required for learned,
/// `judge` for judge; both must outlive the generator.
std::unique_ptr<SignalGenerator> make_generator(const GeneratorSettings& settings,
                                                const ScorerModel* model = nullptr,
                                                Judge* judge = nullptr);

}  // namespace prunepath
