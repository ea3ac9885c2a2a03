// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "prunepath/commands.hpp"
#include "prunepath/error.hpp"
#include "prunepath/serialize.hpp"

using namespace prunepath;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "prunepath_unit" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& f) {
    std::ifstream is(f, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

ExperimentConfig small(const fs::path& dir) {
    json doc = {{"seed", 5},
                {"out_dir", dir.string()},
                {"backend", {{"sim", json::object()}}},
                {"queries", {{"eval_count", 12}, {"train_count", 12}}},
                {"labeler", {{"K", 8}, {"stratify_rollouts", 8}, {"lower", 1}, {"upper", 7}, {"prefix_length", 256}}},
                {"trainer", {{"epochs", 3}}},
                {"run",
                 {{"launch_count", 8},
                  {"retention", {{"retain_count", 2}, {"prefix_length", 256}}},
                  {"generator", {{"kind", "confidence"}}}}}};
    return parse_config(doc);
}

int cli(const std::string& args) {
    const std::string cmd = std::string(PRUNEPATH_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("commands check their inputs") {
    const auto dir = fresh_dir("deps");
    const auto c = small(dir);
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_train(c, out), DependencyError);
    CHECK_THROWS_AS(cmd_label(c, out), DependencyError);
    CHECK_THROWS_AS(cmd_run(c, out), DependencyError);
    CHECK_THROWS_AS(cmd_fit_law(c, out), DependencyError);
    CHECK_THROWS_AS(run_command("bogus", c, out), ArgumentError);
}

TEST_CASE("simulate, label, train, run, report") {
    const auto dir = fresh_dir("chain");
    auto c = small(dir);
    std::ostringstream out;
    cmd_simulate(c, out);
    CHECK(fs::exists(dir / "queries.jsonl"));
    CHECK(fs::exists(dir / "train_queries.jsonl"));
    cmd_label(c, out);
    CHECK(fs::exists(dir / "labels.jsonl"));
    cmd_train(c, out);
    CHECK(fs::exists(dir / "model.json"));
    CHECK(fs::exists(dir / "train_log.csv"));

    cmd_run(c, out);
    const auto run_dir = dir / "runs" / "confidence";
    for (const char* f : {"spec.json", "paths.jsonl", "metrics.csv", "metrics.json", "ledger.json", "timing.json"}) {
        CHECK(fs::exists(run_dir / f));
    }
    CHECK(fs::exists(dir / "runs" / "no_pruning_N8" / "metrics.csv"));
    const auto csv = slurp(run_dir / "metrics.csv");
    CHECK(csv.rfind("method,dataset,launch_count,retained,prefix_length,avg_at_k,avg_at_m_given_k,cons_at_n", 0) == 0);

    // A rerun rewrites the same bytes apart from wall-clock timing.
    const auto paths = slurp(run_dir / "paths.jsonl");
    const auto metrics = slurp(run_dir / "metrics.json");
    cmd_run(c, out);
    CHECK(slurp(run_dir / "paths.jsonl") == paths);
    CHECK(slurp(run_dir / "metrics.json") == metrics);

    c.run.generator.kind = GeneratorKind::learned;
    cmd_run(c, out);
    CHECK(fs::exists(dir / "runs" / "learned" / "metrics.csv"));

    cmd_report(c, out);
    const auto report = slurp(dir / "report.md");
    CHECK(report.find("confidence") != std::string::npos);
    CHECK(report.find("learned") != std::string::npos);
}

TEST_CASE("synthetic sweep and fit recover the planted exponents") {
    const auto dir = fresh_dir("sweep");
    json doc = {{"out_dir", dir.string()},
                {"backend", {{"sim", json::object()}}},
                {"sweep",
                 {{"profile", "synthetic_powerlaw"},
                  {"gamma_grid", {1.0 / 256, 1.0}},
                  {"gamma_points", 241},
                  {"n_grid", json::array()},
                  {"budget_grid", {150000, 200000, 300000, 400000, 600000}},
                  {"prefix_grid", {512, 1024, 2048, 4096}}}}};
    const auto c = parse_config(doc);
    std::ostringstream out;
    cmd_sweep(c, out);
    cmd_fit_law(c, out);
    const auto k = read_json_file(dir / "coefficients.json");
    CHECK(std::abs(k.at("b").get<double>() - 0.46) <= 0.05);
    CHECK(std::abs(k.at("c").get<double>() - 0.40) <= 0.05);
    CHECK(std::abs(k.at("d").get<double>() - 4.55) <= 0.05);
}

TEST_CASE("tables") {
    const auto dir = fresh_dir("tables");
    const auto c = small(dir);
    std::ostringstream out;
    cmd_tables(c, out);
    const auto csv = slurp(dir / "tables" / "math_long_horizon.csv");
    CHECK(csv.rfind("L_prefix,", 0) == 0);
    CHECK(fs::exists(dir / "tables" / "science_short_horizon.txt"));
}

TEST_CASE("cli exit codes") {
    const auto dir = fresh_dir("cli");
    CHECK(cli("--out " + dir.string() + " train") == 3);
    CHECK(cli("--out " + dir.string() + " --set run.launch_count=0 simulate") == 2);
    CHECK(cli("--out " + dir.string() + " --set queries.eval_count=4 --set queries.train_count=4 simulate") == 0);
    CHECK(fs::exists(dir / "queries.jsonl"));
}
