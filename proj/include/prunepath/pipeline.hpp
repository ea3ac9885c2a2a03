// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prunepath/backend.hpp"
#include "prunepath/core.hpp"
#include "prunepath/scaling.hpp"
#include "prunepath/signals.hpp"

namespace prunepath {

struct RunSpec {
    int launch_count = 64;
    RetentionPolicy retention{2048, 8, std::nullopt};
    GeneratorSettings generator;
    // Optional cap on ledger.total; exceeding it is reported, not enforced
    // mid-run.
    std::optional<std::uint64_t> budget_cap;
    std::uint64_t seed = 0;
    // Queries that pass through the launch/check/resume barriers together.
    // Results do not depend on it; it bounds peak memory.
    std::size_t query_batch = 32;
    // Keep prefix token streams in the result. Off: streams are released as
    // soon as the check stage no longer needs them.
    bool keep_token_streams = false;
    unsigned jobs = 1;

    int retained() const { return retention.retained_for(launch_count); }
    void validate() const;
};

struct StageTiming {
    double launch_seconds = 0.0;
    double check_seconds = 0.0;
    double resume_seconds = 0.0;
};

struct RunResult {
    // Per query, ordered by path_id. Pruned paths keep their prefix counts.
    std::vector<QueryPaths> paths;
    // Per query, aligned with `paths`. Empty for unpruned runs.
    std::vector<std::vector<SignalScore>> scores;
    MetricsReport metrics;
    BudgetLedger ledger;
    int launch_count = 0;
    int retained_per_query = 0;
    bool budget_exceeded = false;
    std::vector<std::string> incidents;
    StageTiming timing;
};

/// Baseline: every launched path is completed and all N answers vote.
RunResult run_no_pruning(std::span<const QueryRecord> queries, const RunSpec& spec, TrajectoryBackend& backend);

/// Launch N prefixes, score each once at the checkpoint, resume the top k
/// (ties to the lower path_id), vote over the k answers.
///
/// Answer-vote ties are broken by the mean score rank of each answer group
/// (rank, not raw value, so that any strictly increasing transform of the
/// scores leaves the result unchanged). The generator must be safe to call
/// concurrently when spec.jobs > 1.
RunResult run_with_pruning(std::span<const QueryRecord> queries, const RunSpec& spec, TrajectoryBackend& backend,
                           SignalGenerator& generator);

/// Fills avg_at_k and token_reduction_pct of `pruned` from a matched
/// unpruned run over the same queries.
void attach_baseline(RunResult& pruned, const RunResult& baseline);

struct SweepSpec {
    std::vector<double> gamma_grid;
    // Per-query token budgets; N is derived per cell. Mutually exclusive
    // with n_grid.
    std::vector<std::uint64_t> budget_grid;
    std::vector<int> n_grid;
};

struct SweepRow {
    // Target budget in tokens per query (0 in n_grid mode).
    std::uint64_t budget = 0;
    double gamma = 0.0;
    int launch_count = 0;
    int retained = 0;
    std::int64_t prefix_length = 0;
    double task_length = 0.0;
    double tokens_per_query = 0.0;
    double cons_at_n = 0.0;
    double avg_at_m_given_k = 0.0;
};

struct SweepOptimum {
    // Bucket key: the target budget, or N in n_grid mode.
    std::uint64_t bucket = 0;
    double gamma = 0.0;
    double accuracy = 0.0;
    std::int64_t prefix_length = 0;
    double task_length = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepOptimum> optima;
};

/// Launch count that spends about `budget` tokens per query at retention
/// `gamma`: budget / (L_prefix + gamma (L_task - L_prefix) + per-path check cost).
int launch_count_for_budget(std::uint64_t budget, double gamma, std::int64_t prefix_length, double task_length,
                            std::uint64_t check_cost_per_path);

/// Runs the pruned pipeline at every grid point, then picks the
/// cons@N-maximizing gamma per bucket (ties to the larger gamma).
SweepResult sweep_gamma(std::span<const QueryRecord> queries, const SweepSpec& grid, const RunSpec& base,
                        TrajectoryBackend& backend, SignalGenerator& generator);

/// gamma* per bucket from arbitrary sweep rows.
std::vector<SweepOptimum> extract_optima(std::span<const SweepRow> rows, bool by_budget);

/// Sweep surface from a planted power law: accuracy peaks at the planted
/// gamma* and falls off quadratically in log(gamma).
SweepResult synthetic_powerlaw_sweep(const ScalingCoefficients& planted, std::span<const std::int64_t> prefix_grid,
                                     std::span<const double> task_grid, std::span<const std::uint64_t> budget_grid,
                                     std::span<const double> gamma_grid);

std::vector<PowerLawObservation> observations_from_optima(std::span<const SweepOptimum> optima);

}  // namespace prunepath
