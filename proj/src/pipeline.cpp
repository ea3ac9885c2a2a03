// SPDX-License-Identifier: Apache-2.0
#include "prunepath/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "prunepath/error.hpp"
#include "prunepath/parallel.hpp"

namespace prunepath {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void release_streams(PathRecord& p) {
    p.tokens = {};
    p.token_logprobs = {};
}

class IncidentLog {
public:
    void add(std::string message) {
        std::lock_guard lock(mutex_);
        entries_.push_back(std::move(message));
    }
    std::vector<std::string> take() {
        std::lock_guard lock(mutex_);
        std::sort(entries_.begin(), entries_.end());
        return std::move(entries_);
    }

private:
    std::mutex mutex_;
    std::vector<std::string> entries_;
};

std::string path_name(const PathRecord& p) { return p.query_id + "/" + std::to_string(p.path_id); }

// Scores one query's prefixes. Failures fall back to per-path scoring, then
// to a zero score with an incident.
std::vector<SignalScore> check_query(SignalGenerator& generator, const QueryPaths& prefixes, IncidentLog& incidents) {
    std::vector<SignalScore> scores;
    try {
        scores = generator.score(prefixes);
        if (scores.size() != prefixes.size()) throw Error("generator returned a misaligned score list");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& batch_error) {
        scores.clear();
        for (const auto& p : prefixes) {
            try {
                auto single = generator.score(std::span<const PathRecord>(&p, 1));
                if (single.size() != 1) throw Error("generator returned a misaligned score list");
                scores.push_back(single.front());
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                incidents.add("score failure on " + path_name(p) + ": " + e.what() + "; scored 0");
                scores.push_back({p.path_id, 0.0, generator.kind(), 0});
            }
        }
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto& s = scores[i];
        s.path_id = prefixes[i].path_id;
        if (!(s.value >= 0.0 && s.value <= 1.0)) {
            incidents.add("score out of range on " + path_name(prefixes[i]) + "; scored 0");
            s.value = 0.0;
        }
    }
    return scores;
}

// Indices of the k best scores; ties go to the lower path_id.
std::vector<std::size_t> top_k(const std::vector<SignalScore>& scores, int k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a].value != scores[b].value) return scores[a].value > scores[b].value;
        return scores[a].path_id < scores[b].path_id;
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

RunResult execute(std::span<const QueryRecord> queries, const RunSpec& spec, TrajectoryBackend& backend,
                  SignalGenerator* generator) {
    spec.validate();
    const int N = spec.launch_count;
    const int k = generator ? spec.retained() : N;
    const auto Lp = spec.retention.prefix_length;

    RunResult result;
    result.launch_count = N;
    result.retained_per_query = k;
    result.paths.resize(queries.size());
    if (generator) result.scores.resize(queries.size());
    std::vector<std::vector<double>> tie_ranks(queries.size());
    IncidentLog incidents;
    std::vector<std::string> query_errors(queries.size());

    const std::size_t batch = std::max<std::size_t>(1, spec.query_batch);
    for (std::size_t b0 = 0; b0 < queries.size(); b0 += batch) {
        const std::size_t b1 = std::min(queries.size(), b0 + batch);
        const std::size_t nq = b1 - b0;

        // Launch: every prefix of the batch settles before any check starts.
        auto t0 = Clock::now();
        for (std::size_t q = b0; q < b1; ++q) result.paths[q].resize(static_cast<std::size_t>(N));
        parallel_for(nq * static_cast<std::size_t>(N), spec.jobs, [&](std::size_t cell) {
            const std::size_t q = b0 + cell / static_cast<std::size_t>(N);
            const int path_id = static_cast<int>(cell % static_cast<std::size_t>(N)) + 1;
            try {
                PathRecord p = backend.launch_prefix(queries[q], path_id, Lp);
                result.ledger.add_prefix(static_cast<std::uint64_t>(p.token_count));
                result.paths[q][static_cast<std::size_t>(path_id - 1)] = std::move(p);
            } catch (const std::exception& e) {
                incidents.add("launch failure on " + queries[q].query_id + "/" + std::to_string(path_id) + ": " +
                              e.what());
                query_errors[q] = e.what();
            }
        });
        result.timing.launch_seconds += seconds_since(t0);

        // Check: scores come from launch-time data only.
        t0 = Clock::now();
        if (generator) {
            parallel_for(nq, spec.jobs, [&](std::size_t i) {
                const std::size_t q = b0 + i;
                if (!query_errors[q].empty()) return;
                for (const auto& p : result.paths[q]) {
                    if (p.finished_early) incidents.add("early finisher scored on full content: " + path_name(p));
                }
                auto scores = check_query(*generator, result.paths[q], incidents);
                for (const auto& s : scores) result.ledger.add_check(s.check_cost_tokens);
                const auto keep = top_k(scores, k);
                std::vector<char> retained(scores.size(), 0);
                tie_ranks[q].assign(scores.size(), 0.0);
                for (std::size_t rank = 0; rank < keep.size(); ++rank) {
                    retained[keep[rank]] = 1;
                    tie_ranks[q][keep[rank]] =
                        static_cast<double>(N - static_cast<int>(rank)) / static_cast<double>(N);
                }
                for (std::size_t j = 0; j < scores.size(); ++j) {
                    if (!retained[j]) {
                        result.paths[q][j].status = PathStatus::pruned;
                        release_streams(result.paths[q][j]);
                    }
                }
                result.scores[q] = std::move(scores);
            });
        }
        result.timing.check_seconds += seconds_since(t0);

        // Resume: only launched (retained) paths continue.
        t0 = Clock::now();
        parallel_for(nq * static_cast<std::size_t>(N), spec.jobs, [&](std::size_t cell) {
            const std::size_t q = b0 + cell / static_cast<std::size_t>(N);
            if (!query_errors[q].empty()) return;
            PathRecord& p = result.paths[q][cell % static_cast<std::size_t>(N)];
            if (p.status != PathStatus::launched) return;
            try {
                const auto overhead = backend.resume_overhead_tokens(p);
                PathRecord done = backend.resume_path(p, queries[q]);
                result.ledger.add_resume(static_cast<std::uint64_t>(done.token_count - p.token_count) + overhead);
                if (!spec.keep_token_streams) release_streams(done);
                p = std::move(done);
            } catch (const std::exception& e) {
                incidents.add("resume failure on " + path_name(p) + ": " + e.what());
                query_errors[q] = e.what();
            }
        });
        if (!spec.keep_token_streams) {
            for (std::size_t q = b0; q < b1; ++q) {
                for (auto& p : result.paths[q]) release_streams(p);
            }
        }
        result.timing.resume_seconds += seconds_since(t0);
    }

    // Vote and metrics.
    auto& m = result.metrics;
    double acc_sum = 0.0;
    std::size_t acc_n = 0;
    std::size_t cons_hits = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        QueryBreakdown row;
        row.query_id = queries[q].query_id;
        std::vector<std::string> answers;
        std::vector<double> ties;
        std::size_t correct = 0;
        for (std::size_t j = 0; j < result.paths[q].size(); ++j) {
            const auto& p = result.paths[q][j];
            row.tokens += static_cast<std::uint64_t>(p.token_count);
            if (generator && j < result.scores[q].size()) row.tokens += result.scores[q][j].check_cost_tokens;
            if (p.status != PathStatus::completed) continue;
            row.retained_path_ids.push_back(p.path_id);
            answers.push_back(p.answer.value_or(""));
            if (generator) ties.push_back(tie_ranks[q][j]);
            correct += p.is_correct.value_or(false) ? 1 : 0;
        }
        if (!query_errors[q].empty() || answers.empty()) {
            row.error = query_errors[q].empty() ? "no completed paths" : query_errors[q];
            m.per_query_breakdown.push_back(std::move(row));
            continue;
        }
        row.path_accuracy = static_cast<double>(correct) / static_cast<double>(answers.size());
        row.voted_answer = majority_vote(answers, ties);
        row.vote_correct = answers_match(*row.voted_answer, queries[q].gold_answer);
        acc_sum += row.path_accuracy;
        ++acc_n;
        cons_hits += *row.vote_correct ? 1 : 0;
        m.per_query_breakdown.push_back(std::move(row));
    }
    if (acc_n > 0) {
        m.avg_at_m_given_k = acc_sum / static_cast<double>(acc_n);
        m.cons_at_n = static_cast<double>(cons_hits) / static_cast<double>(acc_n);
    }
    if (!generator) m.avg_at_k = m.avg_at_m_given_k;
    result.incidents = incidents.take();
    if (spec.budget_cap && result.ledger.total() > *spec.budget_cap) result.budget_exceeded = true;
    return result;
}

}  // namespace

void RunSpec::validate() const {
    if (launch_count < 1) throw ConfigError("run.launch_count must be >= 1");
    retention.validate();
    (void)retention.retained_for(launch_count);
}

RunResult run_no_pruning(std::span<const QueryRecord> queries, const RunSpec& spec, TrajectoryBackend& backend) {
    return execute(queries, spec, backend, nullptr);
}

RunResult run_with_pruning(std::span<const QueryRecord> queries, const RunSpec& spec, TrajectoryBackend& backend,
                           SignalGenerator& generator) {
    return execute(queries, spec, backend, &generator);
}

void attach_baseline(RunResult& pruned, const RunResult& baseline) {
    if (pruned.paths.size() != baseline.paths.size()) {
        throw ArgumentError("attach_baseline: runs cover different query sets");
    }
    pruned.metrics.avg_at_k = baseline.metrics.avg_at_m_given_k;
    pruned.metrics.token_reduction_pct = token_reduction(baseline.ledger.total(), pruned.ledger.total());
}

int launch_count_for_budget(std::uint64_t budget, double gamma, std::int64_t prefix_length, double task_length,
                            std::uint64_t check_cost_per_path) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("gamma must lie in (0,1]");
    const double lp = static_cast<double>(prefix_length);
    const double per_path = lp + gamma * std::max(0.0, task_length - lp) + static_cast<double>(check_cost_per_path);
    const long n = std::lround(static_cast<double>(budget) / per_path);
    return static_cast<int>(std::max(1L, n));
}

std::vector<SweepOptimum> extract_optima(std::span<const SweepRow> rows, bool by_budget) {
    std::map<std::uint64_t, SweepOptimum> best;
    for (const auto& r : rows) {
        const std::uint64_t key = by_budget ? r.budget : static_cast<std::uint64_t>(r.launch_count);
        auto it = best.find(key);
        const bool better = it == best.end() || r.cons_at_n > it->second.accuracy ||
                            (r.cons_at_n == it->second.accuracy && r.gamma > it->second.gamma);
        if (better) best[key] = {key, r.gamma, r.cons_at_n, r.prefix_length, r.task_length};
    }
    std::vector<SweepOptimum> out;
    for (auto& [key, opt] : best) out.push_back(opt);
    return out;
}

SweepResult sweep_gamma(std::span<const QueryRecord> queries, const SweepSpec& grid, const RunSpec& base,
                        TrajectoryBackend& backend, SignalGenerator& generator) {
    if (grid.gamma_grid.empty()) throw ConfigError("sweep.gamma_grid must be nonempty");
    const bool by_budget = !grid.budget_grid.empty();
    if (by_budget == !grid.n_grid.empty()) {
        throw ConfigError("sweep: set exactly one of budget_grid / n_grid");
    }
    if (queries.empty()) throw EmptyDatasetError("sweep_gamma: no queries");
    double task_length = 0.0;
    for (const auto& q : queries) task_length += static_cast<double>(q.task_length_ref);
    task_length /= static_cast<double>(queries.size());

    std::uint64_t check_per_path = 0;
    switch (generator.kind()) {
        case GeneratorKind::learned: check_per_path = base.generator.learned.super_tokens; break;
        case GeneratorKind::judge: check_per_path = static_cast<std::uint64_t>(base.retention.prefix_length); break;
        case GeneratorKind::heuristic: {
            const auto chunk = static_cast<std::uint64_t>(base.generator.heuristic.chunk_tokens);
            check_per_path = (static_cast<std::uint64_t>(base.retention.prefix_length) + chunk - 1) / chunk;
            break;
        }
        default: break;
    }

    SweepResult out;
    const std::size_t outer = by_budget ? grid.budget_grid.size() : grid.n_grid.size();
    for (std::size_t o = 0; o < outer; ++o) {
        for (double gamma : grid.gamma_grid) {
            RunSpec spec = base;
            spec.retention.retain_count.reset();
            spec.retention.retain_ratio = gamma;
            SweepRow row;
            row.gamma = gamma;
            if (by_budget) {
                row.budget = grid.budget_grid[o];
                spec.launch_count = launch_count_for_budget(row.budget, gamma, base.retention.prefix_length,
                                                            task_length, check_per_path);
            } else {
                spec.launch_count = grid.n_grid[o];
            }
            const RunResult r = run_with_pruning(queries, spec, backend, generator);
            row.launch_count = spec.launch_count;
            row.retained = r.retained_per_query;
            row.prefix_length = base.retention.prefix_length;
            row.task_length = task_length;
            row.tokens_per_query = static_cast<double>(r.ledger.total()) / static_cast<double>(queries.size());
            row.cons_at_n = r.metrics.cons_at_n;
            row.avg_at_m_given_k = r.metrics.avg_at_m_given_k;
            out.rows.push_back(row);
        }
    }
    out.optima = extract_optima(out.rows, by_budget);
    return out;
}

SweepResult synthetic_powerlaw_sweep(const ScalingCoefficients& planted, std::span<const std::int64_t> prefix_grid,
                                     std::span<const double> task_grid, std::span<const std::uint64_t> budget_grid,
                                     std::span<const double> gamma_grid) {
    if (prefix_grid.empty() || task_grid.empty() || budget_grid.empty() || gamma_grid.empty()) {
        throw ConfigError("synthetic sweep: every grid must be nonempty");
    }
    SweepResult out;
    for (auto lp : prefix_grid) {
        for (double lt : task_grid) {
            std::vector<SweepRow> cell;
            for (auto c : budget_grid) {
                const double inv =
                    predict_inverse_gamma({static_cast<double>(c), static_cast<double>(lp), lt}, planted);
                const double log_peak = -std::log(inv);
                for (double g : gamma_grid) {
                    SweepRow row;
                    row.budget = c;
                    row.gamma = g;
                    row.prefix_length = lp;
                    row.task_length = lt;
                    const double dev = std::log(g) - log_peak;
                    row.cons_at_n = 1.0 / (1.0 + dev * dev);
                    row.avg_at_m_given_k = row.cons_at_n;
                    row.tokens_per_query = static_cast<double>(c);
                    cell.push_back(row);
                }
            }
            auto optima = extract_optima(cell, true);
            out.rows.insert(out.rows.end(), cell.begin(), cell.end());
            out.optima.insert(out.optima.end(), optima.begin(), optima.end());
        }
    }
    return out;
}

std::vector<PowerLawObservation> observations_from_optima(std::span<const SweepOptimum> optima) {
    std::vector<PowerLawObservation> out;
    for (const auto& o : optima) {
        out.push_back({static_cast<double>(o.bucket), static_cast<double>(o.prefix_length), o.task_length,
                       1.0 / o.gamma});
    }
    return out;
}

}  // namespace prunepath
