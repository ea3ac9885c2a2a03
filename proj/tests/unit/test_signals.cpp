// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "prunepath/error.hpp"
#include "prunepath/signals.hpp"
#include "prunepath/simbackend.hpp"

using namespace prunepath;

namespace {

PathRecord with_tokens(int id, std::vector<TokenId> tokens) {
    PathRecord p;
    p.query_id = "q";
    p.path_id = id;
    p.token_logprobs.assign(tokens.size(), -0.5);
    p.prefix_tokens = static_cast<std::int64_t>(tokens.size());
    p.token_count = p.prefix_tokens;
    p.tokens = std::move(tokens);
    return p;
}

PathRecord with_logprobs(std::vector<double> lp) {
    PathRecord p;
    p.query_id = "q";
    p.path_id = 1;
    p.tokens.assign(lp.size(), 0);
    p.token_logprobs = std::move(lp);
    p.prefix_tokens = static_cast<std::int64_t>(p.tokens.size());
    p.token_count = p.prefix_tokens;
    return p;
}

class FixedJudge final : public Judge {
public:
    explicit FixedJudge(double v) : v_(v) {}
    double evaluate(const PathRecord&) override { return v_; }

private:
    double v_;
};

}  // namespace

TEST_CASE("heuristic jaccard scores") {
    std::vector<PathRecord> same{with_tokens(1, {1, 2, 3}), with_tokens(2, {3, 2, 1})};
    for (const auto& s : score_heuristic(same)) CHECK(s.value == 0.0);
    std::vector<PathRecord> disjoint{with_tokens(1, {1, 2}), with_tokens(2, {3, 4})};
    for (const auto& s : score_heuristic(disjoint)) CHECK(s.value == 1.0);
    std::vector<PathRecord> half{with_tokens(1, {1, 2, 3}), with_tokens(2, {2, 3, 4})};
    for (const auto& s : score_heuristic(half)) CHECK(s.value == doctest::Approx(0.5));
    std::vector<PathRecord> single{with_tokens(1, {1})};
    CHECK(score_heuristic(single)[0].value == 1.0);

    // Max over the others: {1,2} vs {1,2,3} is 2/3, vs {9} is 0.
    std::vector<PathRecord> three{with_tokens(1, {1, 2}), with_tokens(2, {1, 2, 3}), with_tokens(3, {9})};
    const auto s = score_heuristic(three);
    CHECK(s[0].value == doctest::Approx(1.0 / 3.0));
    CHECK(s[1].value == doctest::Approx(1.0 / 3.0));
    CHECK(s[2].value == 1.0);

    // Bigrams: (1,2),(2,3) vs (1,2),(2,4) share one of three.
    HeuristicOptions bi;
    bi.ngram = 2;
    std::vector<PathRecord> pairs{with_tokens(1, {1, 2, 3}), with_tokens(2, {1, 2, 4})};
    CHECK(score_heuristic(pairs, bi)[0].value == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("confidence closed forms") {
    CHECK(score_confidence(with_logprobs({0.0, 0.0})).value == 1.0);
    CHECK(score_confidence(with_logprobs({-1.0, -1.0, -1.0})).value == doctest::Approx(std::exp(-1.0)));
    CHECK(score_confidence(with_logprobs({-1.0, -3.0})).value == doctest::Approx(std::exp(-2.0)));
    CHECK_THROWS_AS(score_confidence(with_logprobs({})), ArgumentError);

    // Window 2 over [-1,-1,-5,-1]: window means -1, -3, -3, minimum -3.
    ConfidenceOptions w;
    w.window = 2;
    CHECK(score_confidence(with_logprobs({-1, -1, -5, -1}), w).value == doctest::Approx(std::exp(-3.0)));
    CHECK(score_confidence(with_logprobs({-1.0}), w).value == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("judge scoring") {
    FixedJudge high(1.7);
    FixedJudge low(-0.2);
    const auto p = with_tokens(1, std::vector<TokenId>(2048, 1));
    const auto s = score_judge(p, high);
    CHECK(s.value == 1.0);
    CHECK(s.check_cost_tokens == 2048);
    CHECK(score_judge(p, low).value == 0.0);

    // Zero-noise simulated judge ranks paths as z does.
    SimConfig c;
    c.seed = 17;
    SimBackend b(c);
    SimulatedJudge judge(1, 0.0);
    const auto q = sample_queries(c, 1)[0];
    std::vector<std::pair<double, double>> zs;
    for (int id = 1; id <= 30; ++id) {
        const auto path = b.launch_prefix(q, id, 32);
        zs.emplace_back(*path.latent_quality, score_judge(path, judge).value);
    }
    std::sort(zs.begin(), zs.end());
    for (std::size_t i = 1; i < zs.size(); ++i) CHECK(zs[i].second >= zs[i - 1].second);
}

TEST_CASE("learned scoring") {
    auto m = ScorerModel::zeros(4, 3, true);
    PathRecord p = with_tokens(1, {1, 2, 3, 4, 5, 6, 7});
    p.checkpoint_features = std::vector<double>{0.3, -1.0, 2.0, 0.5};
    const auto s = score_learned(p, m);
    CHECK(s.value == 0.5);
    CHECK(s.check_cost_tokens == 6);

    // Without the adapter the score is a linear head on standardized features.
    auto lin = ScorerModel::zeros(4, 0, false);
    lin.head_weights = {1.0, 2.0, -1.0, 0.5};
    lin.head_bias = 0.1;
    lin.input_mean = {0.0, 0.0, 1.0, 0.0};
    lin.input_scale = {1.0, 2.0, 1.0, 1.0};
    const double logit = 0.1 + 0.3 + 2.0 * (-0.5) - 1.0 * 1.0 + 0.5 * 0.5;
    CHECK(score_learned(p, lin).value == doctest::Approx(1.0 / (1.0 + std::exp(-logit))));

    PathRecord missing = p;
    missing.checkpoint_features.reset();
    CHECK_THROWS_AS(score_learned(missing, m), ArgumentError);
    PathRecord wrong = p;
    wrong.checkpoint_features = std::vector<double>{1.0};
    CHECK_THROWS_AS(score_learned(wrong, m), ConfigError);
}

TEST_CASE("scorer model parameters round trip") {
    auto m = ScorerModel::zeros(3, 2, true);
    CHECK(m.parameter_count() == 3 * 2 + 2 + 2 + 1);
    std::vector<double> theta(m.parameter_count());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = 0.1 * static_cast<double>(i);
    m.set_parameters(theta);
    CHECK(m.parameters() == theta);
    CHECK_THROWS_AS(m.set_parameters(std::vector<double>{1.0}), ConfigError);
    m.head_bias = std::nan("");
    CHECK_THROWS_AS(m.validate(), NumericError);
}

TEST_CASE("cost ordering judge > heuristic > learned") {
    const auto p = with_tokens(1, std::vector<TokenId>(2048, 3));
    FixedJudge j(0.5);
    auto pl = p;
    pl.checkpoint_features = std::vector<double>{0.0};
    const auto m = ScorerModel::zeros(1, 1, true);
    std::vector<PathRecord> batch{p, with_tokens(2, std::vector<TokenId>(2048, 4))};
    const auto judge_cost = score_judge(p, j).check_cost_tokens;
    const auto heuristic_cost = score_heuristic(batch)[0].check_cost_tokens;
    const auto learned_cost = score_learned(pl, m).check_cost_tokens;
    CHECK(judge_cost > heuristic_cost);
    CHECK(heuristic_cost > learned_cost);
}

TEST_CASE("generators stay in range and are pure") {
    SimConfig c;
    c.seed = 23;
    SimBackend b(c);
    const auto qs = sample_queries(c, 20);
    auto model = ScorerModel::zeros(c.feature_dim, 4, true);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 3.0);
    auto theta = model.parameters();
    for (auto& t : theta) t = n(rng);
    model.set_parameters(theta);
    SimulatedJudge judge(2, 0.5);
    for (auto kind : {GeneratorKind::heuristic, GeneratorKind::judge, GeneratorKind::confidence,
                      GeneratorKind::learned, GeneratorKind::oracle, GeneratorKind::random}) {
        GeneratorSettings s;
        s.kind = kind;
        s.random_seed = 4;
        auto g = make_generator(s, &model, &judge);
        CHECK(g->kind() == kind);
        for (const auto& q : qs) {
            std::vector<PathRecord> ps;
            for (int id = 1; id <= 6; ++id) ps.push_back(b.launch_prefix(q, id, 64));
            const auto a = g->score(ps);
            const auto again = g->score(ps);
            REQUIRE(a.size() == ps.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].value >= 0.0);
                CHECK(a[i].value <= 1.0);
                CHECK(a[i].value == again[i].value);
                CHECK(a[i].path_id == ps[i].path_id);
            }
        }
    }
    GeneratorSettings learned;
    learned.kind = GeneratorKind::learned;
    CHECK_THROWS_AS(make_generator(learned), ConfigError);
    CHECK(generator_kind_from_string("judge") == GeneratorKind::judge);
    CHECK_THROWS_AS(generator_kind_from_string("psychic"), ConfigError);
}
