// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "prunepath/commands.hpp"
#include "prunepath/config.hpp"
#include "prunepath/core.hpp"
#include "prunepath/error.hpp"
#include "prunepath/labeler.hpp"
#include "prunepath/pipeline.hpp"
#include "prunepath/scaling.hpp"
#include "prunepath/serialize.hpp"
#include "prunepath/simbackend.hpp"
#include "prunepath/trainer.hpp"

namespace py = pybind11;
using namespace prunepath;

namespace {

ExperimentConfig config_from(const std::string& text) { return parse_config(json::parse(text)); }

std::string run_summary(const RunResult& r) {
    json j = to_json(r.metrics);
    j.erase("per_query_breakdown");
    j["ledger"] = to_json(r.ledger);
    j["launch_count"] = r.launch_count;
    j["retained"] = r.retained_per_query;
    j["incidents"] = r.incidents;
    return j.dump();
}

}  // namespace

PYBIND11_MODULE(_prunepath, m) {
    m.doc() = "Launch-check-resume path pruning core";

    // pybind11 tries the most recent translator first, so the base goes first.
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<ArgumentError>(m, "ArgumentError", base);
    py::register_exception<CollinearityError>(m, "CollinearityError", base);
    py::register_exception<DependencyError>(m, "DependencyError", base);

    m.def("predict_inverse_gamma",
          [](double budget, double prefix, double task, double a, double b, double c, double d) {
              return predict_inverse_gamma({budget, prefix, task}, {a, b, c, d, std::nullopt});
          },
          py::arg("budget_tokens"), py::arg("prefix_tokens"), py::arg("task_tokens"), py::arg("a") = 1.17e4,
          py::arg("b") = 0.46, py::arg("c") = 0.40, py::arg("d") = 4.55);
    m.def("gamma_from_inverse", &gamma_from_inverse);
    m.def("fit_powerlaw",
          [](const std::vector<std::tuple<double, double, double, double>>& rows) {
              std::vector<PowerLawObservation> obs;
              for (const auto& [c, lp, lt, inv] : rows) obs.push_back({c, lp, lt, inv});
              return to_json(fit_powerlaw(obs)).dump();
          },
          "Rows of (budget, prefix, task, inverse_gamma); returns coefficients as JSON.");
    m.def("lookup_table",
          [](double task, const std::vector<std::int64_t>& prefix_grid, const std::vector<std::uint64_t>& budgets) {
              return emit_lookup_table(reference_coefficients(), task, prefix_grid, budgets).values;
          });
    m.def("token_reduction", &token_reduction);
    m.def("majority_vote", [](const std::vector<std::string>& answers, const std::vector<double>& ties) {
        return majority_vote(answers, ties);
    }, py::arg("answers"), py::arg("tie_scores") = std::vector<double>{});
    m.def("soft_bce_loss", &soft_bce_loss);

    m.def("sample_queries",
          [](const std::string& config_json, std::size_t count) {
              const auto c = config_from(config_json);
              if (!c.sim) throw ConfigError("sample_queries needs backend.sim");
              std::vector<std::string> out;
              for (const auto& q : sample_queries(*c.sim, count)) out.push_back(to_json(q).dump());
              return out;
          },
          "Queries as JSON strings, drawn from the simulator of the given config.");

    m.def("run_pipeline",
          [](const std::string& config_json, std::size_t query_count, bool prune, const std::string& model_json) {
              const auto c = config_from(config_json);
              if (!c.sim) throw ConfigError("run_pipeline needs backend.sim");
              py::gil_scoped_release release;
              SimBackend backend(*c.sim);
              const auto queries = sample_queries(*c.sim, query_count);
              if (!prune) return run_summary(run_no_pruning(queries, c.run, backend));
              std::optional<ScorerModel> model;
              if (!model_json.empty()) model = scorer_from_json(json::parse(model_json));
              SimulatedJudge judge(c.signal_seed(), c.sim->judge_noise);
              auto gen = make_generator(c.run.generator, model ? &*model : nullptr, &judge);
              return run_summary(run_with_pruning(queries, c.run, backend, *gen));
          },
          py::arg("config_json"), py::arg("query_count"), py::arg("prune") = true, py::arg("model_json") = "");

    m.def("label_and_train",
          [](const std::string& config_json, std::size_t query_count) {
              const auto c = config_from(config_json);
              if (!c.sim) throw ConfigError("label_and_train needs backend.sim");
              py::gil_scoped_release release;
              SimBackend backend(*c.sim);
              const auto queries = sample_queries(*c.sim, query_count, "t");
              DatasetOptions opts;
              opts.prefixes_per_query = c.labeler.prefixes_per_query;
              opts.rollouts = c.labeler.rollouts;
              opts.prefix_length = c.labeler.prefix_length;
              opts.jobs = c.jobs;
              const auto examples = to_training_examples(build_dataset(queries, backend, opts));
              return to_json(train_scorer(examples, c.trainer).model).dump();
          },
          "Labels simulator prefixes and trains a scorer; returns the model document as JSON.");

    m.def("resolve_config", [](const std::string& config_json) {
        return config_to_json(config_from(config_json)).dump();
    });
    m.def("run_command", [](const std::string& name, const std::string& config_json) {
        const auto c = config_from(config_json);
        std::ostringstream os;
        run_command(name, c, os);
        return os.str();
    });
}
