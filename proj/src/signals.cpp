// SPDX-License-Identifier: Apache-2.0
#include "prunepath/signals.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "prunepath/error.hpp"
#include "prunepath/random.hpp"

namespace prunepath {

namespace {

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<std::uint64_t> shingles(const PathRecord& path, int ngram) {
    std::vector<std::uint64_t> out;
    const auto& t = path.tokens;
    if (ngram <= 1) {
        out.assign(t.begin(), t.end());
    } else if (t.size() >= static_cast<std::size_t>(ngram)) {
        for (std::size_t i = 0; i + static_cast<std::size_t>(ngram) <= t.size(); ++i) {
            std::uint64_t h = 0;
            for (int k = 0; k < ngram; ++k) h = mix(h, static_cast<std::uint64_t>(t[i + static_cast<std::size_t>(k)]));
            out.push_back(h);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::uint64_t materialized_prefix(const PathRecord& p) {
    return static_cast<std::uint64_t>(std::max<std::int64_t>(p.prefix_tokens, 0));
}

}  // namespace

std::string_view to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::heuristic: return "heuristic";
        case GeneratorKind::judge: return "judge";
        case GeneratorKind::confidence: return "confidence";
        case GeneratorKind::learned: return "learned";
        case GeneratorKind::oracle: return "oracle";
        case GeneratorKind::random: return "random";
    }
    return "learned";
}

GeneratorKind generator_kind_from_string(std::string_view name) {
    for (auto k : {GeneratorKind::heuristic, GeneratorKind::judge, GeneratorKind::confidence,
                   GeneratorKind::learned, GeneratorKind::oracle, GeneratorKind::random}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown generator kind '" + std::string(name) + "'");
}

ScorerModel ScorerModel::zeros(std::size_t feature_dim, std::size_t hidden_width, bool use_adapter) {
    ScorerModel m;
    m.feature_dim = feature_dim;
    m.use_adapter = use_adapter;
    m.hidden_width = use_adapter ? hidden_width : 0;
    m.input_mean.assign(feature_dim, 0.0);
    m.input_scale.assign(feature_dim, 1.0);
    if (use_adapter) {
        m.adapter_weights.assign(feature_dim * hidden_width, 0.0);
        m.adapter_bias.assign(hidden_width, 0.0);
    }
    m.head_weights.assign(m.head_inputs(), 0.0);
    return m;
}

std::size_t ScorerModel::parameter_count() const {
    return adapter_weights.size() + adapter_bias.size() + head_weights.size() + 1;
}

void ScorerModel::validate() const {
    if (feature_dim == 0) throw ConfigError("scorer: feature_dim must be positive");
    if (input_mean.size() != feature_dim || input_scale.size() != feature_dim) {
        throw ConfigError("scorer: standardization vectors do not match feature_dim");
    }
    if (use_adapter) {
        if (hidden_width == 0) throw ConfigError("scorer: adapter requires hidden_width > 0");
        if (adapter_weights.size() != feature_dim * hidden_width || adapter_bias.size() != hidden_width) {
            throw ConfigError("scorer: adapter shape does not match F x H");
        }
    } else if (!adapter_weights.empty() || !adapter_bias.empty()) {
        throw ConfigError("scorer: adapter parameters present with use_adapter=false");
    }
    if (head_weights.size() != head_inputs()) throw ConfigError("scorer: head shape mismatch");
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(input_mean) || !finite(input_scale) || !finite(adapter_weights) ||
        !finite(adapter_bias) || !finite(head_weights) || !std::isfinite(head_bias)) {
        throw NumericError("scorer: non-finite parameter");
    }
    for (double s : input_scale) {
        if (!(s > 0.0)) throw ConfigError("scorer: input_scale entries must be positive");
    }
}

double ScorerModel::logit(std::span<const double> features) const {
    if (features.size() != feature_dim) {
        throw ConfigError("scorer expects " + std::to_string(feature_dim) + " features, got " +
                          std::to_string(features.size()));
    }
    std::vector<double> x(feature_dim);
    for (std::size_t i = 0; i < feature_dim; ++i) x[i] = (features[i] - input_mean[i]) / input_scale[i];
    double out = head_bias;
    if (!use_adapter) {
        for (std::size_t i = 0; i < feature_dim; ++i) out += head_weights[i] * x[i];
        return out;
    }
    for (std::size_t h = 0; h < hidden_width; ++h) {
        double pre = adapter_bias[h];
        for (std::size_t i = 0; i < feature_dim; ++i) pre += adapter_weights[i * hidden_width + h] * x[i];
        out += head_weights[h] * std::tanh(pre);
    }
    return out;
}

double ScorerModel::probability(std::span<const double> features) const { return logistic(logit(features)); }

std::vector<double> ScorerModel::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    out.insert(out.end(), adapter_weights.begin(), adapter_weights.end());
    out.insert(out.end(), adapter_bias.begin(), adapter_bias.end());
    out.insert(out.end(), head_weights.begin(), head_weights.end());
    out.push_back(head_bias);
    return out;
}

void ScorerModel::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) throw ConfigError("scorer: parameter vector size mismatch");
    auto it = values.begin();
    std::copy_n(it, adapter_weights.size(), adapter_weights.begin());
    it += static_cast<std::ptrdiff_t>(adapter_weights.size());
    std::copy_n(it, adapter_bias.size(), adapter_bias.begin());
    it += static_cast<std::ptrdiff_t>(adapter_bias.size());
    std::copy_n(it, head_weights.size(), head_weights.begin());
    it += static_cast<std::ptrdiff_t>(head_weights.size());
    head_bias = *it;
}

std::vector<SignalScore> score_heuristic(std::span<const PathRecord> prefixes,
                                         const HeuristicOptions& options) {
    if (options.chunk_tokens < 1) throw ConfigError("heuristic.chunk_tokens must be >= 1");
    std::vector<std::vector<std::uint64_t>> sets;
    sets.reserve(prefixes.size());
    for (const auto& p : prefixes) sets.push_back(shingles(p, options.ngram));

    std::vector<double> max_sim(prefixes.size(), 0.0);
    for (std::size_t i = 0; i < prefixes.size(); ++i) {
        for (std::size_t j = i + 1; j < prefixes.size(); ++j) {
            const double s = jaccard(sets[i], sets[j]);
            max_sim[i] = std::max(max_sim[i], s);
            max_sim[j] = std::max(max_sim[j], s);
        }
    }
    std::vector<SignalScore> out;
    out.reserve(prefixes.size());
    for (std::size_t i = 0; i < prefixes.size(); ++i) {
        SignalScore s;
        s.path_id = prefixes[i].path_id;
        s.value = prefixes.size() < 2 ? 1.0 : 1.0 - max_sim[i];
        s.generator_kind = GeneratorKind::heuristic;
        const auto chunk = static_cast<std::uint64_t>(options.chunk_tokens);
        s.check_cost_tokens = (materialized_prefix(prefixes[i]) + chunk - 1) / chunk;
        out.push_back(s);
    }
    return out;
}

SignalScore score_confidence(const PathRecord& prefix, const ConfidenceOptions& options) {
    const auto& lp = prefix.token_logprobs;
    if (lp.empty()) throw ArgumentError("score_confidence: prefix has no token log-probabilities");
    double level = 0.0;
    const auto n = lp.size();
    const auto w = static_cast<std::size_t>(std::max<std::int64_t>(options.window, 0));
    if (w == 0 || w >= n) {
        double sum = 0.0;
        for (double v : lp) sum += v;
        level = sum / static_cast<double>(n);
    } else {
        double window_sum = 0.0;
        for (std::size_t i = 0; i < w; ++i) window_sum += lp[i];
        double lowest = window_sum;
        for (std::size_t i = w; i < n; ++i) {
            window_sum += lp[i] - lp[i - w];
            lowest = std::min(lowest, window_sum);
        }
        level = lowest / static_cast<double>(w);
    }
    SignalScore s;
    s.path_id = prefix.path_id;
    s.value = std::clamp(std::exp(level), 0.0, 1.0);
    s.generator_kind = GeneratorKind::confidence;
    s.check_cost_tokens = 0;
    return s;
}

double SimulatedJudge::evaluate(const PathRecord& prefix) {
    if (!prefix.success_prob) throw ArgumentError("simulated judge needs a simulator path");
    if (noise_ == 0.0) return *prefix.success_prob;
    Rng rng = stream(seed_, prefix.query_id, prefix.path_id, Stage::judge);
    return *prefix.success_prob + std::normal_distribution<double>(0.0, noise_)(rng);
}

SignalScore score_judge(const PathRecord& prefix, Judge& judge) {
    const double raw = judge.evaluate(prefix);
    if (std::isnan(raw)) throw NumericError("judge returned NaN");
    SignalScore s;
    s.path_id = prefix.path_id;
    s.value = std::clamp(raw, 0.0, 1.0);
    s.generator_kind = GeneratorKind::judge;
    s.check_cost_tokens = materialized_prefix(prefix);
    return s;
}

SignalScore score_learned(const PathRecord& prefix, const ScorerModel& model, const LearnedOptions& options) {
    if (!prefix.checkpoint_features) {
        throw ArgumentError("score_learned: path " + prefix.query_id + "/" + std::to_string(prefix.path_id) +
                            " has no checkpoint features");
    }
    SignalScore s;
    s.path_id = prefix.path_id;
    s.value = model.probability(*prefix.checkpoint_features);
    s.generator_kind = GeneratorKind::learned;
    s.check_cost_tokens = options.super_tokens;
    return s;
}

namespace {

class HeuristicGenerator final : public SignalGenerator {
public:
    explicit HeuristicGenerator(HeuristicOptions o) : options_(o) {}
    GeneratorKind kind() const override { return GeneratorKind::heuristic; }
    std::vector<SignalScore> score(std::span<const PathRecord> prefixes) override {
        return score_heuristic(prefixes, options_);
    }

private:
    HeuristicOptions options_;
};

// Scores each prefix independently through `fn`.
template <GeneratorKind Kind, typename Fn>
class PerPathGenerator final : public SignalGenerator {
public:
    explicit PerPathGenerator(Fn fn) : fn_(std::move(fn)) {}
    GeneratorKind kind() const override { return Kind; }
    std::vector<SignalScore> score(std::span<const PathRecord> prefixes) override {
        std::vector<SignalScore> out;
        out.reserve(prefixes.size());
        for (const auto& p : prefixes) out.push_back(fn_(p));
        return out;
    }

private:
    Fn fn_;
};

template <GeneratorKind Kind, typename Fn>
std::unique_ptr<SignalGenerator> per_path(Fn fn) {
    return std::make_unique<PerPathGenerator<Kind, Fn>>(std::move(fn));
}

}  // namespace

std::unique_ptr<SignalGenerator> make_generator(const GeneratorSettings& settings, const ScorerModel* model,
                                                Judge* judge) {
    switch (settings.kind) {
        case GeneratorKind::heuristic:
            return std::make_unique<HeuristicGenerator>(settings.heuristic);
        case GeneratorKind::confidence: {
            auto opts = settings.confidence;
            return per_path<GeneratorKind::confidence>([opts](const PathRecord& p) { return score_confidence(p, opts); });
        }
        case GeneratorKind::judge: {
            if (judge == nullptr) throw ConfigError("judge generator requires a judge");
            return per_path<GeneratorKind::judge>([judge](const PathRecord& p) { return score_judge(p, *judge); });
        }
        case GeneratorKind::learned: {
            if (model == nullptr) throw ConfigError("learned generator requires a trained scorer model");
            model->validate();
            auto opts = settings.learned;
            return per_path<GeneratorKind::learned>([model, opts](const PathRecord& p) {
                return score_learned(p, *model, opts);
            });
        }
        case GeneratorKind::oracle:
            return per_path<GeneratorKind::oracle>([](const PathRecord& p) {
                if (!p.success_prob) throw ArgumentError("oracle generator needs simulator latents");
                return SignalScore{p.path_id, *p.success_prob, GeneratorKind::oracle, 0};
            });
        case GeneratorKind::random: {
            const std::uint64_t seed = settings.random_seed;
            return per_path<GeneratorKind::random>([seed](const PathRecord& p) {
                Rng rng = stream(seed, p.query_id, p.path_id, Stage::random_signal);
                return SignalScore{p.path_id, std::uniform_real_distribution<double>(0.0, 1.0)(rng),
                                   GeneratorKind::random, 0};
            });
        }
    }
    throw ConfigError("unsupported generator kind");
}

}  // namespace prunepath
