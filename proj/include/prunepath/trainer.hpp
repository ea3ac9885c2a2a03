// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prunepath/signals.hpp"

namespace prunepath {

struct TrainingExample {
    std::string query_id;
    int path_id = 0;
    std::vector<double> features;
    // Soft label in [0,1].
    double target = 0.0;
};

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t batch_size = 16;
    int epochs = 15;
    std::size_t hidden_width = 16;
    bool use_adapter = true;
    std::uint64_t seed = 0;
    // Epochs without validation improvement before stopping.
    int patience = 5;
    // Fraction of distinct queries held out for validation.
    double validation_fraction = 0.1;

    void validate() const;
};

/// -[s log sigmoid(x) + (1-s) log(1 - sigmoid(x))], evaluated as softplus(x) - s x.
double soft_bce_loss(double logit, double target);

/// Mean soft BCE of the model over `batch`.
double mean_loss(const ScorerModel& model, std::span<const TrainingExample> batch);

/// Gradient of mean_loss with respect to ScorerModel::parameters().
std::vector<double> loss_gradient(const ScorerModel& model, std::span<const TrainingExample> batch);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
    // The epoch increased the training loss and was rolled back.
    bool reverted = false;
};

struct TrainResult {
    ScorerModel model;
    std::vector<EpochRecord> log;
    std::vector<std::string> warnings;
    std::vector<std::string> validation_queries;
    int best_epoch = 0;
};

struct QuerySplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::string> validation_queries;
};

/// Holds out whole queries, never single paths.
QuerySplit split_by_query(std::span<const TrainingExample> examples, double validation_fraction,
                          std::uint64_t seed);

/// Mini-batch gradient descent on mean soft BCE. An epoch that raises the
/// full training loss is undone and the learning rate halved, so the logged
/// training loss never increases. Returns the best-validation checkpoint.
TrainResult train_scorer(std::span<const TrainingExample> dataset, const TrainConfig& config);

/// Fraction of examples where (probability > 0.5) agrees with (target > 0.5).
double classification_accuracy(const ScorerModel& model, std::span<const TrainingExample> examples);

}  // namespace prunepath
