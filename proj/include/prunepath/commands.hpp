// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>

#include "prunepath/config.hpp"

namespace prunepath {

// Each subcommand writes its artifacts under config.out_dir and prints one
// summary line of space-separated key=value pairs to `out`.
//
//   simulate  -> queries.jsonl, train_queries.jsonl, stratify.csv
//   label     <- train_queries.jsonl          -> labels.jsonl
//   train     <- labels.jsonl                 -> model.json, train_log.csv
//   run       <- queries.jsonl [, model.json] -> runs/<name>/{spec.json, paths.jsonl,
//                                                metrics.csv, metrics.json, ledger.json, timing.json}
//   sweep     <- queries.jsonl [, model.json] -> sweep.csv, sweep.json
//   fit-law   <- sweep.json                   -> coefficients.json
//   tables    [<- coefficients.json]          -> tables/<layout>.csv, tables/<layout>.txt
//   report    <- runs/*/metrics.csv           -> report.md
//
// Missing inputs raise DependencyError naming the expected file.
void cmd_simulate(const ExperimentConfig& config, std::ostream& out);
void cmd_label(const ExperimentConfig& config, std::ostream& out);
void cmd_train(const ExperimentConfig& config, std::ostream& out);
void cmd_run(const ExperimentConfig& config, std::ostream& out);
void cmd_sweep(const ExperimentConfig& config, std::ostream& out);
void cmd_fit_law(const ExperimentConfig& config, std::ostream& out);
void cmd_tables(const ExperimentConfig& config, std::ostream& out);
void cmd_report(const ExperimentConfig& config, std::ostream& out);

/// Dispatch by name ("simulate", "label", "train", "run", "sweep", "fit-law",
/// "tables", "report"). Throws ArgumentError for an unknown name.
void run_command(const std::string& name, const ExperimentConfig& config, std::ostream& out);

}  // namespace prunepath
