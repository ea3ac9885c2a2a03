// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <string>

#include "prunepath/config.hpp"
#include "prunepath/error.hpp"

using namespace prunepath;
using nlohmann::json;

namespace {

std::string error_of(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("defaults") {
    const auto c = parse_config({{"backend", {{"sim", json::object()}}}});
    REQUIRE(c.sim);
    CHECK_FALSE(c.endpoint);
    CHECK(c.run.launch_count == 64);
    CHECK(c.run.retained() == 8);
    CHECK(c.labeler.rollouts == 32);
    CHECK(c.sweep.profile == "sim");
    CHECK(c.backend_seed() != c.labeler_seed());
}

TEST_CASE("errors name the key path") {
    CHECK(error_of({{"backend", {{"sim", json::object()}}}, {"run", {{"retention", {{"retain_count", "x"}}}}}})
              .rfind("run.retention.retain_count", 0) == 0);
    CHECK(error_of({{"backend", {{"sim", json::object()}}}, {"run", {{"lanch_count", 4}}}}).find("run.lanch_count") !=
          std::string::npos);
    CHECK(error_of({{"backend", {{"sim", {{"confidence_miscalibration", 2.0}}}}}}).find("confidence_miscalibration") !=
          std::string::npos);
    CHECK_FALSE(error_of(json::object()).empty());
    CHECK_FALSE(error_of({{"backend", {{"sim", json::object()}, {"endpoint", {{"base_url", "http://x"}}}}}}).empty());
    CHECK_FALSE(error_of({{"backend", {{"sim", json::object()}}},
                          {"run", {{"retention", {{"retain_count", 4}, {"retain_ratio", 0.5}}}}}})
                    .empty());
}

TEST_CASE("retention given as a ratio") {
    const auto c = parse_config(
        {{"backend", {{"sim", json::object()}}}, {"run", {{"launch_count", 32}, {"retention", {{"retain_ratio", 0.25}}}}}});
    CHECK(c.run.retained() == 8);
    CHECK_FALSE(c.run.retention.retain_count);
}

TEST_CASE("overrides") {
    json doc = {{"backend", {{"sim", json::object()}}}};
    apply_override(doc, "run.launch_count=16");
    apply_override(doc, "run.generator.kind=confidence");
    apply_override(doc, "sweep.gamma_grid=[0.5,1.0]");
    CHECK(doc["run"]["launch_count"] == 16);
    CHECK(doc["run"]["generator"]["kind"] == "confidence");
    const auto c = parse_config(doc);
    CHECK(c.run.launch_count == 16);
    CHECK(c.run.generator.kind == GeneratorKind::confidence);
    CHECK(c.sweep.gamma_grid == std::vector<double>{0.5, 1.0});
    CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigError);
}

TEST_CASE("gamma_points expands the grid") {
    const auto c = parse_config({{"backend", {{"sim", json::object()}}},
                                 {"sweep", {{"gamma_grid", {0.01, 1.0}}, {"gamma_points", 3}}}});
    REQUIRE(c.sweep.gamma_grid.size() == 3);
    CHECK(c.sweep.gamma_grid[1] == doctest::Approx(0.1));
}

TEST_CASE("resolved config round trips") {
    json doc = {{"seed", 9},
                {"backend", {{"sim", {{"feature_dim", 8}, {"informative_features", 4}}}}},
                {"run", {{"launch_count", 16}, {"retention", {{"retain_ratio", 0.25}, {"prefix_length", 512}}}}},
                {"sweep", {{"budget_grid", {100000, 200000}}}}};
    doc["sweep"]["n_grid"] = json::array();
    const auto once = config_to_json(parse_config(doc));
    const auto twice = config_to_json(parse_config(once));
    CHECK(once == twice);

    json ep = {{"backend", {{"endpoint", {{"base_url", "http://localhost:8000"}, {"model_name", "m"}}}}},
               {"queries", {{"eval_file", "eval.jsonl"}}}};
    const auto e = parse_config(ep);
    REQUIRE(e.endpoint);
    CHECK(e.endpoint->api_key_env_var == "PRUNEPATH_API_KEY");
    CHECK(config_to_json(parse_config(config_to_json(e))) == config_to_json(e));
    // Keys never live in config files.
    ep["backend"]["endpoint"]["api_key"] = "sk-123";
    CHECK_THROWS_AS(parse_config(ep), ConfigError);
}
