// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunepath/labeler.hpp"
#include "prunepath/llm_client.hpp"
#include "prunepath/pipeline.hpp"
#include "prunepath/simbackend.hpp"
#include "prunepath/trainer.hpp"

namespace prunepath {

struct QuerySource {
    // Simulator: number of evaluation / training queries to sample.
    std::size_t eval_count = 200;
    std::size_t train_count = 400;
    // Endpoint: JSONL files of QueryRecord.
    std::string eval_file;
    std::string train_file;
    // Appended to each prompt read from file, separated by a newline.
    std::string prompt_suffix;
    std::string dataset_name = "sim";
};

struct LabelerSettings {
    int rollouts = 32;
    int lower = 4;
    int upper = 28;
    int stratify_rollouts = 32;
    bool stratify = true;
    std::int64_t prefix_length = 2048;
    int prefixes_per_query = 4;
};

struct SweepSettings {
    // "sim": run the pipeline on the configured backend.
    // "synthetic_powerlaw": read optima off a planted power-law surface.
    std::string profile = "sim";
    std::vector<double> gamma_grid{1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2};
    // When > 0, gamma_grid is replaced on load by this many log-spaced points
    // between its smallest and largest entry.
    int gamma_points = 0;
    std::vector<std::uint64_t> budget_grid;
    std::vector<int> n_grid{16, 32, 64};
    std::vector<std::int64_t> prefix_grid{2048};
    std::vector<double> task_grid{8000, 10000, 12000};
    ScalingCoefficients planted;
};

struct ScalingSettings {
    // "reference" or "fitted" (coefficients.json in the output directory).
    std::string coefficients = "reference";
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    unsigned jobs = 1;
    // Exactly one of the two is set.
    std::optional<SimConfig> sim;
    std::optional<EndpointConfig> endpoint;
    QuerySource queries;
    RunSpec run;
    std::string run_name;
    bool run_baseline = true;
    LabelerSettings labeler;
    TrainConfig trainer;
    SweepSettings sweep;
    ScalingSettings scaling;

    // Seeds of the named substreams.
    std::uint64_t backend_seed() const;
    std::uint64_t labeler_seed() const;
    std::uint64_t trainer_seed() const;
    std::uint64_t signal_seed() const;
};

/// Applies KEY=VALUE; VALUE is parsed as JSON, else taken as a string.
/// Intermediate objects are created as needed.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Parses and validates. Errors are ConfigError whose message starts with the
/// offending key path, e.g. "run.retention.retain_count: ...". Unknown keys
/// are rejected.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Fully resolved document; parse_config(to_json(c)) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& c);

}  // namespace prunepath
