// SPDX-License-Identifier: Apache-2.0
// prunepath: experiment driver.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prunepath/commands.hpp"
#include "prunepath/config.hpp"
#include "prunepath/error.hpp"
#include "prunepath/serialize.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Launch-check-resume path pruning experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::vector<std::string> overrides;
    unsigned jobs = 0;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--set", overrides, "KEY=VALUE override, repeatable")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    app.add_option("--jobs", jobs, "worker threads");
    app.add_option("--seed", seed, "global seed");
    app.add_option("--out", out_dir, "output directory");

    for (const char* name : {"simulate", "label", "train", "run", "sweep", "fit-law", "tables", "report"}) {
        app.add_subcommand(name);
    }
    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        prunepath::json doc = prunepath::json::object();
        if (!config_path.empty()) doc = prunepath::read_json_file(config_path);
        for (const auto& o : overrides) prunepath::apply_override(doc, o);
        if (!doc.contains("backend")) doc["backend"]["sim"] = prunepath::json::object();
        if (jobs > 0) doc["jobs"] = jobs;
        if (seed) doc["seed"] = *seed;
        if (!out_dir.empty()) doc["out_dir"] = out_dir;
        const auto config = prunepath::parse_config(doc);
        prunepath::run_command(command, config, std::cout);
    } catch (const prunepath::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const prunepath::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
