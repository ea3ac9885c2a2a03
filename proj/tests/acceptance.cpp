// SPDX-License-Identifier: Apache-2.0
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "prunepath/core.hpp"
#include "prunepath/error.hpp"
#include "prunepath/labeler.hpp"
#include "prunepath/pipeline.hpp"
#include "prunepath/scaling.hpp"
#include "prunepath/signals.hpp"
#include "prunepath/simbackend.hpp"
#include "prunepath/trainer.hpp"

using namespace prunepath;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

// Upper tail of Binomial(n, 1/2).
double sign_test_p(int wins, int n) {
    double p = 0.0;
    for (int k = wins; k <= n; ++k) {
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
    }
    return p;
}

// Accuracy over every path of an unpruned run, from the raw records.
double path_accuracy(const RunResult& r) {
    double hits = 0.0;
    double n = 0.0;
    for (const auto& q : r.paths) {
        for (const auto& p : q) {
            if (p.status != PathStatus::completed) continue;
            hits += p.is_correct.value_or(false) ? 1.0 : 0.0;
            n += 1.0;
        }
    }
    return hits / n;
}

// ---------------------------------------------------------------------------

Outcome worked_examples() {
    const auto coeffs = reference_coefficients();
    const double g1 = predict_inverse_gamma({158'000, 2048, 8650}, coeffs);
    const double g2 = predict_inverse_gamma({275'000, 3'000, 12'000}, coeffs);
    const bool ok = rel_err(g1, 9.63) <= 0.05 && rel_err(g2, 3.36) <= 0.05;
    return {ok, fmt("%.3f vs 9.63 (%.2f%%), %.3f vs 3.36 (%.2f%%), tol 5%%", g1, 100 * rel_err(g1, 9.63), g2,
                    100 * rel_err(g2, 3.36))};
}

Outcome lookup_tables() {
    // Printed reference tables, rows by L_prefix, columns by budget.
    const std::vector<std::vector<double>> science = {
        {5.23, 5.56, 5.87, 6.16, 6.44, 6.70, 6.95, 7.19, 7.42},
        {6.90, 7.34, 7.75, 8.13, 8.49, 8.84, 9.17, 9.49, 9.80},
        {8.11, 8.63, 9.11, 9.56, 9.99, 10.40, 10.79, 11.16, 11.52},
        {9.10, 9.68, 10.22, 10.73, 11.21, 11.67, 12.10, 12.52, 12.93},
        {9.95, 10.59, 11.17, 11.73, 12.26, 12.76, 13.23, 13.69, 14.13}};
    const std::vector<std::vector<double>> math = {
        {1.87, 2.07, 2.25, 2.42, 2.57, 2.71, 2.85, 2.98, 3.10},
        {2.47, 2.73, 2.97, 3.19, 3.39, 3.58, 3.76, 3.93, 4.09},
        {2.90, 3.21, 3.49, 3.75, 3.99, 4.21, 4.42, 4.62, 4.81},
        {3.25, 3.60, 3.92, 4.21, 4.48, 4.72, 4.96, 5.18, 5.39},
        {3.56, 3.94, 4.29, 4.60, 4.89, 5.17, 5.42, 5.66, 5.90}};
    const auto layouts = reference_table_layouts();
    const std::vector<const std::vector<std::vector<double>>*> printed = {&science, &math};
    double worst = 0.0;
    std::size_t cells = 0;
    for (std::size_t t = 0; t < 2; ++t) {
        const auto& l = layouts[t];
        const auto table = emit_lookup_table(reference_coefficients(), l.task_tokens, l.prefix_grid, l.budget_grid);
        for (std::size_t r = 0; r < table.values.size(); ++r) {
            for (std::size_t c = 0; c < table.values[r].size(); ++c) {
                worst = std::max(worst, rel_err(table.values[r][c], (*printed[t])[r][c]));
                ++cells;
            }
        }
    }
    return {cells == 90 && worst <= 0.03, fmt("%zu cells, worst relative error %.2f%% (tol 3%%)", cells, 100 * worst)};
}

Outcome fit_recovery() {
    const ScalingCoefficients planted{1e4, 0.5, 0.4, 4.5, std::nullopt};
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> logu(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.05);
    auto draw = [&](double lo, double hi) { return lo * std::pow(hi / lo, logu(rng)); };
    std::vector<PowerLawObservation> clean;
    std::vector<PowerLawObservation> noisy;
    for (int i = 0; i < 200; ++i) {
        PowerLawObservation o{draw(5e4, 1e6), draw(256, 8192), draw(2000, 32000), 0.0};
        o.inverse_gamma = predict_inverse_gamma({o.budget_tokens, o.prefix_tokens, o.task_tokens}, planted);
        clean.push_back(o);
        o.inverse_gamma *= std::exp(noise(rng));
        noisy.push_back(o);
    }
    const auto exact = fit_powerlaw(clean);
    const double worst_exact = std::max({rel_err(exact.a, planted.a), rel_err(exact.b, planted.b),
                                         rel_err(exact.c, planted.c), rel_err(exact.d, planted.d)});
    const auto fit = fit_powerlaw(noisy);
    const double worst_noisy =
        std::max({std::abs(fit.b - planted.b), std::abs(fit.c - planted.c), std::abs(fit.d - planted.d)});
    return {worst_exact <= 1e-9 && worst_noisy <= 0.03,
            fmt("noiseless max rel err %.2e (tol 1e-9); noisy max exponent err %.4f (tol 0.03)", worst_exact,
                worst_noisy)};
}

Outcome token_reduction_pairs() {
    const double r1 = token_reduction(782'300, 204'300);
    const double r2 = token_reduction(594'200, 184'400);
    const bool ok = std::abs(r1 - 73.88) <= 0.02 && std::abs(r2 - 68.97) <= 0.02;
    return {ok, fmt("%.4f%% vs 73.88%%, %.4f%% vs 68.97%% (tol 0.02 pp)", r1, r2)};
}

SimConfig eval_sim(std::uint64_t seed) {
    SimConfig c;
    c.seed = seed;
    return c;
}

RunSpec eval_spec(GeneratorKind kind, std::uint64_t seed) {
    RunSpec spec;
    spec.launch_count = 64;
    spec.retention = {2048, 8, std::nullopt};
    spec.generator.kind = kind;
    spec.generator.random_seed = seed;
    spec.seed = seed;
    spec.jobs = jobs();
    return spec;
}

Outcome neutrality() {
    const auto sim = eval_sim(101);
    SimBackend backend(sim);
    const auto queries = sample_queries(sim, 500);
    const auto base = run_no_pruning(queries, eval_spec(GeneratorKind::random, 7), backend);
    auto gen = make_generator(eval_spec(GeneratorKind::random, 7).generator);
    const auto pruned = run_with_pruning(queries, eval_spec(GeneratorKind::random, 7), backend, *gen);
    const double p = path_accuracy(base);
    const double got = pruned.metrics.avg_at_m_given_k;
    // Binomial CI of avg@64 at the sample size of the pruned estimate.
    const double n = 500.0 * 8.0;
    const double half = 2.5758 * std::sqrt(p * (1.0 - p) / n);
    return {std::abs(got - p) <= half,
            fmt("avg@8|64 %.4f, avg@64 %.4f, 99%% CI half-width %.4f (n=%.0f)", got, p, half, n)};
}

Outcome effectiveness() {
    const auto sim = eval_sim(202);
    SimBackend backend(sim);
    const auto queries = sample_queries(sim, 500);
    const auto spec = eval_spec(GeneratorKind::oracle, 11);
    const auto base = run_no_pruning(queries, spec, backend);
    auto gen = make_generator(spec.generator);
    const auto pruned = run_with_pruning(queries, spec, backend, *gen);
    // Paired per-query difference, one-sided z test at the 99% level.
    std::vector<double> diff;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        diff.push_back(pruned.metrics.per_query_breakdown[q].path_accuracy -
                       base.metrics.per_query_breakdown[q].path_accuracy);
    }
    double mean = 0.0;
    for (double d : diff) mean += d;
    mean /= static_cast<double>(diff.size());
    double var = 0.0;
    for (double d : diff) var += (d - mean) * (d - mean);
    var /= static_cast<double>(diff.size() - 1);
    const double z = mean / std::sqrt(var / static_cast<double>(diff.size()));
    const double reduction = token_reduction(base.ledger.total(), pruned.ledger.total());
    return {z > 2.3263 && reduction >= 60.0,
            fmt("avg@8|64 %.4f vs avg@64 %.4f (paired z %.1f, need > 2.33); tokens -%.2f%% (need >= 60%%)",
                pruned.metrics.avg_at_m_given_k, path_accuracy(base), z, reduction)};
}

// Trains a scorer on labels from a disjoint query pool.
ScorerModel train_on_sim(const SimConfig& sim, std::size_t train_queries, int rollouts, std::uint64_t seed) {
    SimBackend backend(sim);
    const auto queries = sample_queries(sim, train_queries, "train");
    DatasetOptions opts;
    opts.prefixes_per_query = 4;
    opts.rollouts = rollouts;
    opts.prefix_length = 2048;
    opts.jobs = jobs();
    const auto records = build_dataset(queries, backend, opts);
    const auto examples = to_training_examples(records);
    TrainConfig cfg;
    cfg.seed = seed;
    return train_scorer(examples, cfg).model;
}

Outcome learned_vs_confidence() {
    int wins = 0;
    std::string margins;
    for (int rep = 0; rep < 20; ++rep) {
        auto sim = eval_sim(1000 + static_cast<std::uint64_t>(rep));
        sim.confidence_miscalibration = 0.7;
        const auto model = train_on_sim(sim, 200, 32, static_cast<std::uint64_t>(rep));
        SimBackend backend(sim);
        const auto queries = sample_queries(sim, 100, "eval");
        auto learned_spec = eval_spec(GeneratorKind::learned, static_cast<std::uint64_t>(rep));
        auto conf_spec = eval_spec(GeneratorKind::confidence, static_cast<std::uint64_t>(rep));
        auto learned = make_generator(learned_spec.generator, &model);
        auto conf = make_generator(conf_spec.generator);
        const double a = run_with_pruning(queries, learned_spec, backend, *learned).metrics.avg_at_m_given_k;
        const double b = run_with_pruning(queries, conf_spec, backend, *conf).metrics.avg_at_m_given_k;
        wins += a > b ? 1 : 0;
        margins += fmt(" %+.3f", a - b);
    }
    const double p = sign_test_p(wins, 20);
    return {p < 0.01, fmt("learned beat confidence in %d/20 (sign test p=%.2e); margins%s", wins, p, margins.c_str())};
}

Outcome label_variance() {
    SimConfig sim = eval_sim(303);
    SimBackend backend(sim);
    // A fixed prefix with a mid-range success probability.
    QueryRecord q = sample_queries(sim, 1).front();
    q.base_success_prob = 0.5;
    PathRecord prefix;
    for (int id = 1;; ++id) {
        prefix = backend.launch_prefix(q, id, 2048);
        if (std::abs(*prefix.success_prob - 0.5) < 0.2) break;
    }
    const double qv = *prefix.success_prob;
    std::string detail;
    bool ok = true;
    for (int K : {1, 32}) {
        std::vector<double> s;
        for (std::uint64_t r = 0; r < 500; ++r) s.push_back(mc_label(backend, prefix, q, K, r).s_mc);
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= 500.0;
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= 499.0;
        const double want = qv * (1.0 - qv) / K;
        ok = ok && rel_err(var, want) <= 0.10;
        detail += fmt("K=%d Var %.5f vs %.5f (%.1f%%); ", K, var, want, 100 * rel_err(var, want));
    }

    int wins = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto sim_r = eval_sim(5000 + static_cast<std::uint64_t>(rep));
        const auto m32 = train_on_sim(sim_r, 60, 32, static_cast<std::uint64_t>(rep));
        const auto m1 = train_on_sim(sim_r, 60, 1, static_cast<std::uint64_t>(rep));
        SimBackend b(sim_r);
        const auto queries = sample_queries(sim_r, 100, "eval");
        const auto spec = eval_spec(GeneratorKind::learned, static_cast<std::uint64_t>(rep));
        auto g32 = make_generator(spec.generator, &m32);
        auto g1 = make_generator(spec.generator, &m1);
        const double a = run_with_pruning(queries, spec, b, *g32).metrics.avg_at_m_given_k;
        const double c = run_with_pruning(queries, spec, b, *g1).metrics.avg_at_m_given_k;
        wins += a > c ? 1 : 0;
    }
    ok = ok && wins >= 15;
    detail += fmt("K=32 scorer beat K=1 scorer in %d/20 (need >= 15)", wins);
    return {ok, detail};
}

Outcome gradient_check() {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        const std::size_t F = 1 + rng() % 6;
        const std::size_t H = 1 + rng() % 5;
        auto model = ScorerModel::zeros(F, H, draw % 4 != 0);
        for (std::size_t j = 0; j < F; ++j) {
            model.input_mean[j] = 0.3 * n(rng);
            model.input_scale[j] = 0.5 + u(rng);
        }
        auto theta = model.parameters();
        for (auto& t : theta) t = 0.7 * n(rng);
        model.set_parameters(theta);
        std::vector<TrainingExample> batch(1 + rng() % 8);
        for (auto& e : batch) {
            for (std::size_t j = 0; j < F; ++j) e.features.push_back(n(rng));
            e.target = u(rng);
        }
        const auto grad = loss_gradient(model, batch);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double h = 1e-5;
            auto plus = theta;
            auto minus = theta;
            plus[i] += h;
            minus[i] -= h;
            model.set_parameters(plus);
            const double lp = mean_loss(model, batch);
            model.set_parameters(minus);
            const double lm = mean_loss(model, batch);
            const double fd = (lp - lm) / (2 * h);
            worst = std::max(worst, std::abs(grad[i] - fd) / std::max(1e-6, std::max(std::abs(grad[i]), std::abs(fd))));
        }
        model.set_parameters(theta);
    }
    return {worst < 1e-4, fmt("max relative error %.2e over 100 draws (tol 1e-4)", worst)};
}

std::string run_fingerprint(const RunResult& r) {
    std::string out;
    for (const auto& q : r.paths) {
        for (const auto& p : q) {
            out += fmt("%s/%d:%s:%lld:%s;", p.query_id.c_str(), p.path_id, std::string(to_string(p.status)).c_str(),
                       static_cast<long long>(p.token_count), p.answer.value_or("-").c_str());
        }
    }
    for (const auto& q : r.scores) {
        for (const auto& s : q) out += fmt("%d=%.17g;", s.path_id, s.value);
    }
    out += fmt("ledger %llu %llu %llu", static_cast<unsigned long long>(r.ledger.prefix_tokens()),
               static_cast<unsigned long long>(r.ledger.resume_tokens()),
               static_cast<unsigned long long>(r.ledger.check_tokens()));
    return out;
}

// Generator wrapper applying a strictly increasing transform.
class Transformed final : public SignalGenerator {
public:
    Transformed(SignalGenerator& inner, std::function<double(double)> f) : inner_(inner), f_(std::move(f)) {}
    GeneratorKind kind() const override { return inner_.kind(); }
    std::vector<SignalScore> score(std::span<const PathRecord> prefixes) override {
        auto s = inner_.score(prefixes);
        for (auto& v : s) v.value = f_(v.value);
        return s;
    }

private:
    SignalGenerator& inner_;
    std::function<double(double)> f_;
};

std::vector<int> retained_ids(const RunResult& r) {
    std::vector<int> ids;
    for (const auto& b : r.metrics.per_query_breakdown) ids.insert(ids.end(), b.retained_path_ids.begin(), b.retained_path_ids.end());
    return ids;
}

Outcome determinism_and_invariance() {
    std::string failure;
    // Byte-identical reruns, including across worker counts.
    {
        const auto sim = eval_sim(404);
        const auto queries = sample_queries(sim, 40);
        auto spec = eval_spec(GeneratorKind::confidence, 3);
        spec.launch_count = 16;
        spec.retention = {256, 4, std::nullopt};
        SimBackend b1(sim);
        SimBackend b2(sim);
        auto g1 = make_generator(spec.generator);
        auto g2 = make_generator(spec.generator);
        spec.jobs = 1;
        const auto r1 = run_with_pruning(queries, spec, b1, *g1);
        spec.jobs = jobs();
        const auto r2 = run_with_pruning(queries, spec, b2, *g2);
        if (run_fingerprint(r1) != run_fingerprint(r2)) failure += "rerun differs; ";
    }

    // Fuzzed runs: monotone invariance, lifecycle and ledger identities.
    std::mt19937_64 rng(4242);
    const std::vector<std::function<double(double)>> transforms = {
        [](double v) { return v * v; }, [](double v) { return std::sqrt(v); },
        [](double v) { return 0.1 + 0.8 * v; }, [](double v) { return std::pow(v, 5.0); }};
    const std::vector<GeneratorKind> kinds = {GeneratorKind::heuristic, GeneratorKind::confidence,
                                              GeneratorKind::oracle, GeneratorKind::random};
    int runs = 0;
    for (int i = 0; i < 10'000 && failure.empty(); ++i) {
        SimConfig sim = eval_sim(rng());
        sim.length_mean = 40.0 + static_cast<double>(rng() % 200);
        SimBackend backend(sim);
        const auto queries = sample_queries(sim, 1 + rng() % 3);
        RunSpec spec;
        spec.launch_count = 1 + static_cast<int>(rng() % 8);
        spec.retention = {1 + static_cast<std::int64_t>(rng() % 64),
                          1 + static_cast<int>(rng() % static_cast<unsigned>(spec.launch_count)), std::nullopt};
        spec.generator.kind = kinds[rng() % kinds.size()];
        spec.generator.random_seed = rng();
        spec.generator.heuristic.chunk_tokens = 16;
        spec.query_batch = 1 + rng() % 3;
        auto gen = make_generator(spec.generator);
        Transformed tgen(*gen, transforms[rng() % transforms.size()]);
        const auto r = run_with_pruning(queries, spec, backend, *gen);
        const auto rt = run_with_pruning(queries, spec, backend, tgen);
        ++runs;
        if (retained_ids(r) != retained_ids(rt) ||
            r.metrics.per_query_breakdown.size() != rt.metrics.per_query_breakdown.size()) {
            failure += fmt("run %d: retained set changed under transform; ", i);
            break;
        }
        for (std::size_t q = 0; q < queries.size(); ++q) {
            if (r.metrics.per_query_breakdown[q].voted_answer != rt.metrics.per_query_breakdown[q].voted_answer) {
                failure += fmt("run %d: vote changed under transform; ", i);
            }
        }
        std::uint64_t prefix_sum = 0;
        std::uint64_t resume_sum = 0;
        std::uint64_t check_sum = 0;
        const int k = spec.retained();
        for (std::size_t q = 0; q < queries.size(); ++q) {
            int completed = 0;
            int pruned = 0;
            for (const auto& p : r.paths[q]) {
                prefix_sum += static_cast<std::uint64_t>(p.prefix_tokens);
                if (p.status == PathStatus::completed) {
                    ++completed;
                    resume_sum += static_cast<std::uint64_t>(p.token_count - p.prefix_tokens);
                    if (!p.answer || !p.is_correct) failure += fmt("run %d: completed path without answer; ", i);
                } else if (p.status == PathStatus::pruned) {
                    ++pruned;
                    if (p.answer || p.token_count != p.prefix_tokens) {
                        failure += fmt("run %d: pruned path continued; ", i);
                    }
                } else {
                    failure += fmt("run %d: path left in launched state; ", i);
                }
                if (p.prefix_tokens > spec.retention.prefix_length) failure += fmt("run %d: prefix overrun; ", i);
            }
            for (const auto& s : r.scores[q]) {
                check_sum += s.check_cost_tokens;
                if (!(s.value >= 0.0 && s.value <= 1.0)) failure += fmt("run %d: score out of range; ", i);
            }
            if (completed != k || pruned != spec.launch_count - k) failure += fmt("run %d: k mismatch; ", i);
        }
        if (prefix_sum != r.ledger.prefix_tokens() || resume_sum != r.ledger.resume_tokens() ||
            check_sum != r.ledger.check_tokens()) {
            failure += fmt("run %d: ledger identity broken; ", i);
        }
    }
    return {failure.empty(), failure.empty() ? fmt("rerun identical; %d fuzzed runs clean", runs) : failure};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"scaling law worked examples", worked_examples},
        {"lookup table regression", lookup_tables},
        {"power-law fit recovery", fit_recovery},
        {"token reduction arithmetic", token_reduction_pairs},
        {"random signal is neutral", neutrality},
        {"oracle signal is effective", effectiveness},
        {"learned scorer beats confidence", learned_vs_confidence},
        {"soft label variance and K ordering", label_variance},
        {"soft BCE gradient", gradient_check},
        {"determinism and invariance", determinism_and_invariance},
    };
    // Optional argument: run a single criterion by number.
    const int only = argc > 1 ? std::atoi(argv[1]) : 0;
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && only != static_cast<int>(i + 1)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %zu %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
