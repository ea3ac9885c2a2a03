// SPDX-License-Identifier: Apache-2.0
#include "prunepath/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "prunepath/error.hpp"

namespace prunepath {

void QueryRecord::validate() const {
    if (query_id.empty()) throw ArgumentError("query_id must be nonempty");
    if (base_success_prob && (*base_success_prob < 0.0 || *base_success_prob > 1.0)) {
        throw ArgumentError("base_success_prob out of [0,1] for query " + query_id);
    }
    if (task_length_ref < 1) throw ArgumentError("task_length_ref must be >= 1 for query " + query_id);
}

std::string_view to_string(PathStatus status) {
    switch (status) {
        case PathStatus::launched: return "launched";
        case PathStatus::pruned: return "pruned";
        case PathStatus::completed: return "completed";
    }
    return "launched";
}

PathStatus path_status_from_string(std::string_view name) {
    if (name == "launched") return PathStatus::launched;
    if (name == "pruned") return PathStatus::pruned;
    if (name == "completed") return PathStatus::completed;
    throw ArgumentError("unknown path status '" + std::string(name) + "'");
}

void PathRecord::validate() const {
    const std::string where = query_id + "/" + std::to_string(path_id);
    if (token_logprobs.size() != tokens.size()) {
        throw ArgumentError("token/logprob length mismatch in path " + where);
    }
    for (double lp : token_logprobs) {
        if (!(lp <= 0.0)) throw ArgumentError("positive or NaN logprob in path " + where);
    }
    if (status == PathStatus::pruned && answer) {
        throw LifecycleError("pruned path carries an answer: " + where);
    }
    if (status != PathStatus::completed && is_correct) {
        throw LifecycleError("correctness set on an unfinished path: " + where);
    }
    if (token_count < static_cast<std::int64_t>(tokens.size())) {
        throw ArgumentError("token_count below materialized length in path " + where);
    }
}

void RetentionPolicy::validate() const {
    if (prefix_length < 1) throw ConfigError("prefix_length must be >= 1");
    if (retain_count.has_value() == retain_ratio.has_value()) {
        throw ConfigError("exactly one of retain_count / retain_ratio must be set");
    }
    if (retain_count && *retain_count < 1) throw ConfigError("retain_count must be >= 1");
    if (retain_ratio && !(*retain_ratio > 0.0 && *retain_ratio <= 1.0)) {
        throw ConfigError("retain_ratio must lie in (0, 1]");
    }
}

int RetentionPolicy::retained_for(int launch_count) const {
    validate();
    if (launch_count < 1) throw ConfigError("launch_count must be >= 1");
    int k = 0;
    if (retain_count) {
        k = *retain_count;
    } else {
        k = static_cast<int>(std::lround(*retain_ratio * launch_count));
        k = std::max(k, 1);
    }
    if (k > launch_count) {
        throw ConfigError("retain_count " + std::to_string(k) + " exceeds launch_count " +
                          std::to_string(launch_count));
    }
    return k;
}

BudgetLedger::BudgetLedger(std::uint64_t prefix, std::uint64_t resume, std::uint64_t check)
    : prefix_(prefix), resume_(resume), check_(check) {}

BudgetLedger::BudgetLedger(const BudgetLedger& other)
    : prefix_(other.prefix_tokens()), resume_(other.resume_tokens()), check_(other.check_tokens()) {}

BudgetLedger& BudgetLedger::operator=(const BudgetLedger& other) {
    prefix_.store(other.prefix_tokens());
    resume_.store(other.resume_tokens());
    check_.store(other.check_tokens());
    return *this;
}

void MetricsReport::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (avg_at_k && !in_unit(*avg_at_k)) throw NumericError("avg_at_k out of [0,1]");
    if (!in_unit(avg_at_m_given_k)) throw NumericError("avg_at_m_given_k out of [0,1]");
    if (!in_unit(cons_at_n)) throw NumericError("cons_at_n out of [0,1]");
    if (token_reduction_pct && *token_reduction_pct > 100.0) {
        throw NumericError("token_reduction_pct above 100");
    }
}

std::string_view trim(std::string_view text) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = text.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(ws);
    return text.substr(first, last - first + 1);
}

bool answers_match(std::string_view a, std::string_view b) { return trim(a) == trim(b); }

double avg_at_k(std::span<const QueryPaths> queries) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& paths : queries) {
        std::size_t completed = 0;
        std::size_t correct = 0;
        for (const auto& p : paths) {
            if (p.status != PathStatus::completed) continue;
            if (!p.is_correct) {
                throw ArgumentError("completed path without known correctness: " + p.query_id + "/" +
                                    std::to_string(p.path_id));
            }
            ++completed;
            correct += *p.is_correct ? 1 : 0;
        }
        if (completed == 0) continue;
        sum += static_cast<double>(correct) / static_cast<double>(completed);
        ++counted;
    }
    if (counted == 0) throw EmptyDatasetError("avg_at_k: no completed paths");
    return sum / static_cast<double>(counted);
}

std::string majority_vote(std::span<const std::string> answers, std::span<const double> tie_scores) {
    if (answers.empty()) throw EmptyDatasetError("majority_vote: empty answer list");
    if (!tie_scores.empty() && tie_scores.size() != answers.size()) {
        throw ArgumentError("majority_vote: tie_scores must align with answers");
    }
    struct Group {
        std::size_t count = 0;
        double score_sum = 0.0;
    };
    // std::map iterates in lexicographic order, which is the final tie-break.
    std::map<std::string, Group, std::less<>> groups;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        auto& g = groups[std::string(trim(answers[i]))];
        ++g.count;
        if (!tie_scores.empty()) g.score_sum += tie_scores[i];
    }
    const std::string* best = nullptr;
    const Group* best_group = nullptr;
    for (const auto& [answer, group] : groups) {
        if (best == nullptr || group.count > best_group->count) {
            best = &answer;
            best_group = &group;
            continue;
        }
        if (group.count == best_group->count && !tie_scores.empty()) {
            const double mean = group.score_sum / static_cast<double>(group.count);
            const double best_mean = best_group->score_sum / static_cast<double>(best_group->count);
            if (mean > best_mean) {
                best = &answer;
                best_group = &group;
            }
        }
    }
    return *best;
}

double token_reduction(std::uint64_t tokens_original, std::uint64_t tokens_pruned) {
    if (tokens_original == 0) throw NumericError("token_reduction: original token count is zero");
    const double orig = static_cast<double>(tokens_original);
    return (orig - static_cast<double>(tokens_pruned)) / orig * 100.0;
}

ConsensusResult cons_at_n(std::span<const QueryPaths> queries, std::span<const QueryRecord> gold) {
    std::unordered_map<std::string_view, std::string_view> gold_by_id;
    for (const auto& q : gold) gold_by_id.emplace(q.query_id, q.gold_answer);

    ConsensusResult result;
    std::size_t hits = 0;
    for (const auto& paths : queries) {
        const std::string id = paths.empty() ? std::string("<empty>") : paths.front().query_id;
        std::vector<std::string> answers;
        for (const auto& p : paths) {
            if (p.status == PathStatus::completed && p.answer) answers.push_back(*p.answer);
        }
        if (answers.empty()) {
            result.failures.emplace_back(id, "no completed paths");
            continue;
        }
        const auto it = gold_by_id.find(id);
        if (it == gold_by_id.end()) {
            result.failures.emplace_back(id, "gold answer unknown");
            continue;
        }
        ++result.scored_queries;
        if (answers_match(majority_vote(answers), it->second)) ++hits;
    }
    if (result.scored_queries == 0) throw EmptyDatasetError("cons_at_n: no query could be scored");
    result.value = static_cast<double>(hits) / static_cast<double>(result.scored_queries);
    return result;
}

}  // namespace prunepath
