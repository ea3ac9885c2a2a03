// SPDX-License-Identifier: Apache-2.0
#include "prunepath/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "prunepath/error.hpp"
#include "prunepath/random.hpp"

namespace prunepath {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Accumulates the gradient of one example's loss into `grad`.
void accumulate_gradient(const ScorerModel& m, const TrainingExample& ex, std::vector<double>& grad,
                         std::vector<double>& x, std::vector<double>& hidden) {
    const std::size_t F = m.feature_dim;
    const std::size_t H = m.hidden_width;
    for (std::size_t i = 0; i < F; ++i) x[i] = (ex.features[i] - m.input_mean[i]) / m.input_scale[i];

    double logit = m.head_bias;
    if (m.use_adapter) {
        for (std::size_t h = 0; h < H; ++h) {
            double pre = m.adapter_bias[h];
            for (std::size_t i = 0; i < F; ++i) pre += m.adapter_weights[i * H + h] * x[i];
            hidden[h] = std::tanh(pre);
            logit += m.head_weights[h] * hidden[h];
        }
    } else {
        for (std::size_t i = 0; i < F; ++i) logit += m.head_weights[i] * x[i];
    }
    const double g = sigmoid(logit) - ex.target;

    const std::size_t w_off = 0;
    const std::size_t b_off = m.adapter_weights.size();
    const std::size_t v_off = b_off + m.adapter_bias.size();
    const std::size_t c_off = v_off + m.head_weights.size();
    grad[c_off] += g;
    if (!m.use_adapter) {
        for (std::size_t i = 0; i < F; ++i) grad[v_off + i] += g * x[i];
        return;
    }
    for (std::size_t h = 0; h < H; ++h) {
        grad[v_off + h] += g * hidden[h];
        const double dpre = g * m.head_weights[h] * (1.0 - hidden[h] * hidden[h]);
        grad[b_off + h] += dpre;
        for (std::size_t i = 0; i < F; ++i) grad[w_off + i * H + h] += dpre * x[i];
    }
}

void check_example(const ScorerModel& m, const TrainingExample& ex) {
    if (ex.features.size() != m.feature_dim) {
        throw ConfigError("training example " + ex.query_id + "/" + std::to_string(ex.path_id) + " has " +
                          std::to_string(ex.features.size()) + " features, model expects " +
                          std::to_string(m.feature_dim));
    }
}

std::vector<TrainingExample> gather(std::span<const TrainingExample> all, const std::vector<std::size_t>& idx) {
    std::vector<TrainingExample> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(all[i]);
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("trainer.learning_rate must be positive");
    if (epochs < 1) throw ConfigError("trainer.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
    if (use_adapter && hidden_width < 1) throw ConfigError("trainer.hidden_width must be >= 1");
    if (patience < 1) throw ConfigError("trainer.patience must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("trainer.validation_fraction must lie in [0,1)");
    }
}

double soft_bce_loss(double logit, double target) {
    if (!std::isfinite(logit)) throw NumericError("soft_bce_loss: non-finite logit");
    if (!(target >= 0.0 && target <= 1.0)) throw ArgumentError("soft_bce_loss: target outside [0,1]");
    const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
    return softplus - target * logit;
}

double mean_loss(const ScorerModel& model, std::span<const TrainingExample> batch) {
    if (batch.empty()) throw EmptyDatasetError("mean_loss: empty batch");
    double sum = 0.0;
    for (const auto& ex : batch) {
        check_example(model, ex);
        sum += soft_bce_loss(model.logit(ex.features), ex.target);
    }
    return sum / static_cast<double>(batch.size());
}

std::vector<double> loss_gradient(const ScorerModel& model, std::span<const TrainingExample> batch) {
    if (batch.empty()) throw EmptyDatasetError("loss_gradient: empty batch");
    model.validate();
    std::vector<double> grad(model.parameter_count(), 0.0);
    std::vector<double> x(model.feature_dim);
    std::vector<double> hidden(model.hidden_width);
    for (const auto& ex : batch) {
        check_example(model, ex);
        accumulate_gradient(model, ex, grad, x, hidden);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& g : grad) g *= inv;
    return grad;
}

QuerySplit split_by_query(std::span<const TrainingExample> examples, double validation_fraction,
                          std::uint64_t seed) {
    std::set<std::string> unique;
    for (const auto& ex : examples) unique.insert(ex.query_id);
    std::vector<std::string> ids(unique.begin(), unique.end());

    std::size_t holdout = 0;
    if (ids.size() >= 2 && validation_fraction > 0.0) {
        holdout = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(ids.size())));
        holdout = std::clamp<std::size_t>(holdout, 1, ids.size() - 1);
    }
    Rng rng(derive_seed(seed, "validation-split"));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::set<std::string> held(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(holdout));

    QuerySplit split;
    split.validation_queries.assign(held.begin(), held.end());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        (held.count(examples[i].query_id) ? split.validation : split.train).push_back(i);
    }
    return split;
}

TrainResult train_scorer(std::span<const TrainingExample> dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw EmptyDatasetError("train_scorer: empty dataset");
    const std::size_t F = dataset.front().features.size();
    if (F == 0) throw ConfigError("train_scorer: examples carry no features");

    // Canonical order makes training independent of the input permutation.
    std::vector<TrainingExample> data(dataset.begin(), dataset.end());
    std::sort(data.begin(), data.end(), [](const TrainingExample& a, const TrainingExample& b) {
        if (a.query_id != b.query_id) return a.query_id < b.query_id;
        if (a.path_id != b.path_id) return a.path_id < b.path_id;
        if (a.features != b.features) return a.features < b.features;
        return a.target < b.target;
    });

    TrainResult result;
    const bool constant_labels = std::all_of(data.begin(), data.end(), [&](const TrainingExample& ex) {
        return ex.target == data.front().target;
    });
    if (constant_labels) result.warnings.push_back("all training labels are identical");

    const QuerySplit split = split_by_query(data, config.validation_fraction, config.seed);
    result.validation_queries = split.validation_queries;
    const std::vector<TrainingExample> train = gather(data, split.train);
    const std::vector<TrainingExample> val = gather(data, split.validation);
    if (val.empty()) result.warnings.push_back("no validation queries; selecting on training loss");

    ScorerModel model = ScorerModel::zeros(F, config.hidden_width, config.use_adapter);
    for (std::size_t i = 0; i < F; ++i) {
        double mean = 0.0;
        for (const auto& ex : train) {
            check_example(model, ex);
            mean += ex.features[i];
        }
        mean /= static_cast<double>(train.size());
        double var = 0.0;
        for (const auto& ex : train) var += (ex.features[i] - mean) * (ex.features[i] - mean);
        var /= static_cast<double>(train.size());
        model.input_mean[i] = mean;
        model.input_scale[i] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }

    Rng rng(derive_seed(config.seed, "trainer-init"));
    {
        std::vector<double> params(model.parameter_count(), 0.0);
        std::size_t off = 0;
        std::uniform_real_distribution<double> adapter_init(-1.0 / std::sqrt(static_cast<double>(F)),
                                                            1.0 / std::sqrt(static_cast<double>(F)));
        for (std::size_t i = 0; i < model.adapter_weights.size(); ++i) params[off++] = adapter_init(rng);
        off += model.adapter_bias.size();
        const double head_bound = 1.0 / std::sqrt(static_cast<double>(model.head_inputs()));
        std::uniform_real_distribution<double> head_init(-head_bound, head_bound);
        for (std::size_t i = 0; i < model.head_weights.size(); ++i) params[off++] = head_init(rng);
        model.set_parameters(params);
    }

    auto validation_loss = [&](const ScorerModel& m) { return val.empty() ? mean_loss(m, train) : mean_loss(m, val); };

    double lr = config.learning_rate;
    double train_loss = mean_loss(model, train);
    ScorerModel best = model;
    double best_val = validation_loss(model);
    int since_best = 0;
    result.log.push_back({0, train_loss, best_val, lr, false});

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, "trainer-shuffle"));
    std::vector<TrainingExample> batch;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::vector<double> snapshot = model.parameters();
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        std::vector<double> params = snapshot;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
            const std::vector<double> grad = loss_gradient(model, batch);
            for (std::size_t p = 0; p < params.size(); ++p) params[p] -= lr * grad[p];
            model.set_parameters(params);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        double loss = std::numeric_limits<double>::infinity();
        bool finite = std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); });
        if (finite) loss = mean_loss(model, train);
        if (!finite || !std::isfinite(loss) || loss > train_loss + 1e-12) {
            model.set_parameters(snapshot);
            lr *= 0.5;
            rec.reverted = true;
            loss = train_loss;
        }
        train_loss = loss;
        rec.train_loss = train_loss;
        rec.learning_rate = lr;
        rec.val_loss = validation_loss(model);
        result.log.push_back(rec);

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = model;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    result.model = std::move(best);
    return result;
}

double classification_accuracy(const ScorerModel& model, std::span<const TrainingExample> examples) {
    if (examples.empty()) throw EmptyDatasetError("classification_accuracy: no examples");
    std::size_t hits = 0;
    for (const auto& ex : examples) {
        const bool predicted = model.probability(ex.features) > 0.5;
        hits += predicted == (ex.target > 0.5) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

}  // namespace prunepath
