// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunepath {

using TokenId = std::int32_t;

struct QueryRecord {
    std::string query_id;
    std::string prompt;
    std::string gold_answer;
    // Simulator latent; absent for real backends.
    std::optional<double> base_success_prob;
    std::int64_t task_length_ref = 1;

    void validate() const;
};

enum class PathStatus { launched, pruned, completed };

std::string_view to_string(PathStatus status);
PathStatus path_status_from_string(std::string_view name);

/// One trajectory for one query.
///
/// `tokens` / `token_logprobs` hold the materialized stream. `token_count` is
/// the number of tokens the backend reported generating for the path, which
/// can exceed `tokens.size()` when a backend only counts completion tokens or
/// when streams were released after the check stage.
struct PathRecord {
    std::string query_id;
    int path_id = 0;
    std::vector<TokenId> tokens;
    std::vector<double> token_logprobs;
    std::optional<std::vector<double>> checkpoint_features;
    std::int64_t prefix_tokens = 0;
    std::int64_t token_count = 0;
    PathStatus status = PathStatus::launched;
    std::optional<std::string> answer;
    std::optional<bool> is_correct;

    // Set when the trajectory terminated before reaching the checkpoint.
    bool finished_early = false;
    // Text of the generated stream (network backends only).
    std::string text;

    // Simulator latents, absent for real backends.
    std::optional<double> latent_quality;
    std::optional<double> success_prob;

    void validate() const;
};

/// Paths of one query, in path_id order.
using QueryPaths = std::vector<PathRecord>;

struct RetentionPolicy {
    std::int64_t prefix_length = 2048;
    std::optional<int> retain_count;
    std::optional<double> retain_ratio;

    void validate() const;
    // k for a launch of `launch_count` paths; throws ConfigError if k > N.
    int retained_for(int launch_count) const;
};

/// Token accounting for one run. Counters only grow, and may be bumped from
/// concurrent pipeline workers.
class BudgetLedger {
public:
    BudgetLedger() = default;
    BudgetLedger(std::uint64_t prefix, std::uint64_t resume, std::uint64_t check);
    BudgetLedger(const BudgetLedger& other);
    BudgetLedger& operator=(const BudgetLedger& other);

    void add_prefix(std::uint64_t tokens) { prefix_.fetch_add(tokens, std::memory_order_relaxed); }
    void add_resume(std::uint64_t tokens) { resume_.fetch_add(tokens, std::memory_order_relaxed); }
    void add_check(std::uint64_t tokens) { check_.fetch_add(tokens, std::memory_order_relaxed); }

    std::uint64_t prefix_tokens() const { return prefix_.load(std::memory_order_relaxed); }
    std::uint64_t resume_tokens() const { return resume_.load(std::memory_order_relaxed); }
    std::uint64_t check_tokens() const { return check_.load(std::memory_order_relaxed); }
    std::uint64_t total() const { return prefix_tokens() + resume_tokens() + check_tokens(); }

private:
    std::atomic<std::uint64_t> prefix_{0};
    std::atomic<std::uint64_t> resume_{0};
    std::atomic<std::uint64_t> check_{0};
};

struct QueryBreakdown {
    std::string query_id;
    std::vector<int> retained_path_ids;
    std::optional<std::string> voted_answer;
    std::optional<bool> vote_correct;
    double path_accuracy = 0.0;
    std::uint64_t tokens = 0;
    std::string error;
};

struct MetricsReport {
    // Accuracy over every launched path. Only known when all paths were
    // completed, or when a matched baseline was attached.
    std::optional<double> avg_at_k;
    // Accuracy over the completed (retained) paths.
    double avg_at_m_given_k = 0.0;
    double cons_at_n = 0.0;
    std::optional<double> token_reduction_pct;
    std::vector<QueryBreakdown> per_query_breakdown;

    void validate() const;
};

// Answers compare equal after trimming surrounding whitespace.
std::string_view trim(std::string_view text);
bool answers_match(std::string_view a, std::string_view b);

/// Mean correctness of completed paths, macro-averaged over queries.
/// Non-completed paths are ignored; a completed path with unknown correctness
/// is an ArgumentError; no completed path at all is an EmptyDatasetError.
double avg_at_k(std::span<const QueryPaths> queries);

/// Most frequent answer. Ties go to the group with the higher mean tie score
/// (when given, one score per answer), then to the lexicographically smallest
/// answer.
std::string majority_vote(std::span<const std::string> answers,
                          std::span<const double> tie_scores = {});

/// Relative token reduction in percent.
double token_reduction(std::uint64_t tokens_original, std::uint64_t tokens_pruned);

struct ConsensusResult {
    double value = 0.0;
    std::size_t scored_queries = 0;
    // (query_id, reason) for queries excluded from the mean.
    std::vector<std::pair<std::string, std::string>> failures;
};

/// Fraction of queries whose majority vote over completed answers equals the
/// gold answer. Queries without completed paths are reported, not averaged.
ConsensusResult cons_at_n(std::span<const QueryPaths> queries,
                          std::span<const QueryRecord> gold);

}  // namespace prunepath
