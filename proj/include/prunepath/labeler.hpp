// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prunepath/backend.hpp"
#include "prunepath/core.hpp"
#include "prunepath/trainer.hpp"

namespace prunepath {

/// A prefix with its Monte-Carlo success estimate: s_mc is the mean of the K
/// rollout correctness bits.
struct LabeledPrefix {
    std::string query_id;
    int path_id = 0;
    std::int64_t prefix_tokens = 0;
    std::vector<double> features;
    double s_mc = 0.0;
    int rollouts = 0;
    std::vector<std::uint8_t> bits;
};

struct StratifyOptions {
    int rollouts = 32;
    // Inclusive bounds on the pass count.
    int lower = 4;
    int upper = 28;
    std::int64_t prefix_length = 2048;
    unsigned jobs = 1;
};

// Path ids used for stratification samples; kept clear of the 1..N range that
// labeling and evaluation use.
inline constexpr int kStratifyPathBase = 1'000'000;

struct StratifiedQuery {
    QueryRecord query;
    int pass_count = 0;
    bool retained = false;
};

/// Pass counts of `rollouts` independent full paths per query.
std::vector<StratifiedQuery> measure_difficulty(std::span<const QueryRecord> queries,
                                                TrajectoryBackend& backend,
                                                const StratifyOptions& options);

/// Queries whose pass count lies in [lower, upper].
std::vector<QueryRecord> stratify_queries(std::span<const QueryRecord> queries, TrajectoryBackend& backend,
                                          const StratifyOptions& options);

LabeledPrefix mc_label(TrajectoryBackend& backend, const PathRecord& prefix, const QueryRecord& query,
                       int rollouts, std::uint64_t draw = 0);

struct DatasetOptions {
    int prefixes_per_query = 4;
    int rollouts = 32;
    std::int64_t prefix_length = 2048;
    unsigned jobs = 1;
    // Rollout stream selector passed to mc_label.
    std::uint64_t draw = 0;
};

/// Launches `prefixes_per_query` prefixes (path ids 1..P) for each query and
/// labels every prefix. Output order is query order, then path id.
std::vector<LabeledPrefix> build_dataset(std::span<const QueryRecord> queries, TrajectoryBackend& backend,
                                         const DatasetOptions& options);

struct DatasetHeader {
    std::string backend;
    std::uint64_t seed = 0;
    int rollouts = 0;
    std::int64_t prefix_length = 0;
    std::size_t feature_dim = 0;
    std::size_t record_count = 0;
};

void write_dataset(const std::filesystem::path& file, const DatasetHeader& header,
                   std::span<const LabeledPrefix> records);

struct Dataset {
    DatasetHeader header;
    std::vector<LabeledPrefix> records;
};

Dataset read_dataset(const std::filesystem::path& file);

std::vector<TrainingExample> to_training_examples(std::span<const LabeledPrefix> records);

}  // namespace prunepath
