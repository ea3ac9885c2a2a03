// SPDX-License-Identifier: Apache-2.0
#include "prunepath/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "prunepath/error.hpp"
#include "prunepath/labeler.hpp"
#include "prunepath/serialize.hpp"

namespace prunepath {

namespace fs = std::filesystem;

namespace {

std::string num(double v, const char* f = "%.6g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path out_path(const ExperimentConfig& c, const fs::path& rel) { return fs::path(c.out_dir) / rel; }

fs::path require(const ExperimentConfig& c, const fs::path& rel, const std::string& producer) {
    const fs::path p = out_path(c, rel);
    if (!fs::exists(p)) {
        throw DependencyError("missing " + p.string() + " (run '" + producer + "' first)");
    }
    return p;
}

struct Backends {
    std::unique_ptr<TrajectoryBackend> backend;
    std::unique_ptr<Judge> judge;
};

Backends make_backends(const ExperimentConfig& c) {
    Backends b;
    if (c.sim) {
        b.backend = std::make_unique<SimBackend>(*c.sim);
        b.judge = std::make_unique<SimulatedJudge>(c.signal_seed(), c.sim->judge_noise);
    } else {
        auto http = std::make_unique<HttpBackend>(*c.endpoint, make_http_transport(*c.endpoint));
        b.judge = std::make_unique<HttpJudge>(http->client());
        b.backend = std::move(http);
    }
    return b;
}

std::vector<QueryRecord> load_file_queries(const ExperimentConfig& c, const std::string& file) {
    auto queries = read_queries(file);
    if (!c.queries.prompt_suffix.empty()) {
        for (auto& q : queries) q.prompt += "\n" + c.queries.prompt_suffix;
    }
    return queries;
}

struct LoadedModel {
    ScorerModel model;
    std::optional<std::int64_t> trained_prefix_length;
};

std::optional<LoadedModel> load_model_if_needed(const ExperimentConfig& c) {
    if (c.run.generator.kind != GeneratorKind::learned) return std::nullopt;
    const json doc = read_json_file(require(c, "model.json", "train"));
    LoadedModel m{scorer_from_json(doc), std::nullopt};
    if (doc.contains("trained_prefix_length")) m.trained_prefix_length = doc["trained_prefix_length"].get<std::int64_t>();
    return m;
}

std::string metrics_header() {
    return "method,dataset,launch_count,retained,prefix_length,avg_at_k,avg_at_m_given_k,cons_at_n,tokens_total,"
           "tokens_per_query,token_reduction_pct,budget_exceeded\n";
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v, "%.6f") : std::string(); }

void write_run_dir(const fs::path& dir, const ExperimentConfig& config, const std::string& method,
                   const RunSpec& spec, const RunResult& r, std::size_t query_count) {
    json spec_doc = config_to_json(config);
    spec_doc["run"]["name"] = method;
    write_text_file(dir / "spec.json", spec_doc.dump(2) + "\n");

    std::ostringstream paths;
    for (std::size_t q = 0; q < r.paths.size(); ++q) {
        for (std::size_t j = 0; j < r.paths[q].size(); ++j) {
            json line = to_json(r.paths[q][j]);
            if (q < r.scores.size() && j < r.scores[q].size()) line["score"] = to_json(r.scores[q][j]);
            paths << line.dump() << '\n';
        }
    }
    write_text_file(dir / "paths.jsonl", paths.str());

    const auto& m = r.metrics;
    std::ostringstream csv;
    csv << metrics_header() << method << ',' << config.queries.dataset_name << ',' << r.launch_count << ','
        << r.retained_per_query << ',' << spec.retention.prefix_length << ',' << opt_num(m.avg_at_k) << ','
        << num(m.avg_at_m_given_k, "%.6f") << ',' << num(m.cons_at_n, "%.6f") << ',' << r.ledger.total() << ','
        << num(static_cast<double>(r.ledger.total()) / static_cast<double>(std::max<std::size_t>(1, query_count)),
               "%.1f")
        << ',' << opt_num(m.token_reduction_pct) << ',' << (r.budget_exceeded ? "true" : "false") << '\n';
    write_text_file(dir / "metrics.csv", csv.str());

    json metrics = to_json(m);
    metrics["incidents"] = r.incidents;
    write_text_file(dir / "metrics.json", metrics.dump(2) + "\n");
    json ledger = to_json(r.ledger);
    if (spec.budget_cap) ledger["budget_cap"] = *spec.budget_cap;
    ledger["budget_exceeded"] = r.budget_exceeded;
    write_text_file(dir / "ledger.json", ledger.dump(2) + "\n");
    json timing = {{"launch_seconds", r.timing.launch_seconds},
                   {"check_seconds", r.timing.check_seconds},
                   {"resume_seconds", r.timing.resume_seconds}};
    write_text_file(dir / "timing.json", timing.dump(2) + "\n");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void cmd_simulate(const ExperimentConfig& c, std::ostream& out) {
    auto b = make_backends(c);
    std::vector<QueryRecord> eval;
    std::vector<QueryRecord> pool;
    if (c.sim) {
        eval = sample_queries(*c.sim, c.queries.eval_count, "q");
        pool = sample_queries(*c.sim, c.queries.train_count, "t");
    } else {
        eval = load_file_queries(c, c.queries.eval_file);
        if (!c.queries.train_file.empty()) pool = load_file_queries(c, c.queries.train_file);
    }
    std::vector<QueryRecord> train = pool;
    if (c.labeler.stratify && !pool.empty()) {
        StratifyOptions opts;
        opts.rollouts = c.labeler.stratify_rollouts;
        opts.lower = c.labeler.lower;
        opts.upper = c.labeler.upper;
        opts.prefix_length = c.labeler.prefix_length;
        opts.jobs = c.jobs;
        const auto measured = measure_difficulty(pool, *b.backend, opts);
        std::ostringstream csv;
        csv << "query_id,pass_count,retained\n";
        train.clear();
        for (const auto& s : measured) {
            csv << s.query.query_id << ',' << s.pass_count << ',' << (s.retained ? 1 : 0) << '\n';
            if (s.retained) train.push_back(s.query);
        }
        write_text_file(out_path(c, "stratify.csv"), csv.str());
    }
    write_queries(out_path(c, "queries.jsonl"), eval);
    write_queries(out_path(c, "train_queries.jsonl"), train);
    out << "simulate eval_queries=" << eval.size() << " train_pool=" << pool.size() << " train_queries=" << train.size()
        << " out=" << c.out_dir << '\n';
}

void cmd_label(const ExperimentConfig& c, std::ostream& out) {
    const auto queries = read_queries(require(c, "train_queries.jsonl", "simulate"));
    if (queries.empty()) throw EmptyDatasetError("train_queries.jsonl holds no queries");
    auto b = make_backends(c);
    DatasetOptions opts;
    opts.prefixes_per_query = c.labeler.prefixes_per_query;
    opts.rollouts = c.labeler.rollouts;
    opts.prefix_length = c.labeler.prefix_length;
    opts.jobs = c.jobs;
    opts.draw = c.labeler_seed() & 0xffffffffu;
    const auto records = build_dataset(queries, *b.backend, opts);
    DatasetHeader h;
    h.backend = std::string(b.backend->name());
    h.seed = c.seed;
    h.rollouts = opts.rollouts;
    h.prefix_length = opts.prefix_length;
    h.feature_dim = records.empty() ? 0 : records.front().features.size();
    h.record_count = records.size();
    write_dataset(out_path(c, "labels.jsonl"), h, records);
    double mean = 0.0;
    for (const auto& r : records) mean += r.s_mc;
    mean /= static_cast<double>(std::max<std::size_t>(1, records.size()));
    out << "label records=" << records.size() << " K=" << opts.rollouts << " mean_s_mc=" << num(mean, "%.4f")
        << " out=" << out_path(c, "labels.jsonl").string() << '\n';
}

void cmd_train(const ExperimentConfig& c, std::ostream& out) {
    const Dataset ds = read_dataset(require(c, "labels.jsonl", "label"));
    const auto examples = to_training_examples(ds.records);
    const TrainResult r = train_scorer(examples, c.trainer);
    json model = to_json(r.model);
    model["trained_prefix_length"] = ds.header.prefix_length;
    model["trained_K"] = ds.header.rollouts;
    write_text_file(out_path(c, "model.json"), model.dump(2) + "\n");
    std::ostringstream log;
    log << "epoch,train_loss,val_loss,learning_rate,reverted\n";
    for (const auto& e : r.log) {
        log << e.epoch << ',' << num(e.train_loss, "%.8f") << ',' << num(e.val_loss, "%.8f") << ','
            << num(e.learning_rate, "%.6g") << ',' << (e.reverted ? 1 : 0) << '\n';
    }
    write_text_file(out_path(c, "train_log.csv"), log.str());
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    const auto& best = r.log.at(static_cast<std::size_t>(r.best_epoch));
    out << "train examples=" << examples.size() << " epochs=" << (r.log.size() - 1) << " best_epoch=" << r.best_epoch
        << " val_loss=" << num(best.val_loss, "%.6f") << " accuracy="
        << num(classification_accuracy(r.model, examples), "%.4f") << " out=" << out_path(c, "model.json").string()
        << '\n';
}

void cmd_run(const ExperimentConfig& c, std::ostream& out) {
    const auto queries = read_queries(require(c, "queries.jsonl", "simulate"));
    if (queries.empty()) throw EmptyDatasetError("queries.jsonl holds no queries");
    const auto loaded = load_model_if_needed(c);
    if (loaded && loaded->trained_prefix_length && *loaded->trained_prefix_length != c.run.retention.prefix_length) {
        std::cerr << "warning: scorer trained at L_prefix=" << *loaded->trained_prefix_length
                  << " but deployed at L_prefix=" << c.run.retention.prefix_length << '\n';
    }
    auto b = make_backends(c);
    auto generator = make_generator(c.run.generator, loaded ? &loaded->model : nullptr, b.judge.get());
    RunResult result = run_with_pruning(queries, c.run, *b.backend, *generator);
    const std::string method = c.run_name.empty() ? std::string(to_string(c.run.generator.kind)) : c.run_name;

    if (c.run_baseline) {
        const RunResult baseline = run_no_pruning(queries, c.run, *b.backend);
        attach_baseline(result, baseline);
        write_run_dir(out_path(c, "runs/no_pruning_N" + std::to_string(c.run.launch_count)), c, "no_pruning", c.run,
                      baseline, queries.size());
    }
    write_run_dir(out_path(c, "runs/" + method), c, method, c.run, result, queries.size());
    for (const auto& i : result.incidents) std::cerr << "incident: " << i << '\n';
    const auto& m = result.metrics;
    out << "run method=" << method << " N=" << result.launch_count << " k=" << result.retained_per_query
        << " avg_at_m_given_k=" << num(m.avg_at_m_given_k, "%.4f")
        << " avg_at_k=" << (m.avg_at_k ? num(*m.avg_at_k, "%.4f") : "na") << " cons_at_n=" << num(m.cons_at_n, "%.4f")
        << " tokens=" << result.ledger.total()
        << " reduction_pct=" << (m.token_reduction_pct ? num(*m.token_reduction_pct, "%.2f") : "na")
        << " incidents=" << result.incidents.size() << " out=" << out_path(c, "runs/" + method).string() << '\n';
}

void cmd_sweep(const ExperimentConfig& c, std::ostream& out) {
    SweepResult result;
    bool by_budget = !c.sweep.budget_grid.empty();
    if (c.sweep.profile == "synthetic_powerlaw") {
        result = synthetic_powerlaw_sweep(c.sweep.planted, c.sweep.prefix_grid, c.sweep.task_grid,
                                          c.sweep.budget_grid, c.sweep.gamma_grid);
        by_budget = true;
    } else {
        const auto queries = read_queries(require(c, "queries.jsonl", "simulate"));
        if (queries.empty()) throw EmptyDatasetError("queries.jsonl holds no queries");
        const auto loaded = load_model_if_needed(c);
        auto b = make_backends(c);
        auto generator = make_generator(c.run.generator, loaded ? &loaded->model : nullptr, b.judge.get());
        SweepSpec grid;
        grid.gamma_grid = c.sweep.gamma_grid;
        if (by_budget) {
            grid.budget_grid = c.sweep.budget_grid;
        } else {
            grid.n_grid = c.sweep.n_grid;
        }
        for (auto lp : c.sweep.prefix_grid) {
            RunSpec base = c.run;
            base.retention.prefix_length = lp;
            auto part = sweep_gamma(queries, grid, base, *b.backend, *generator);
            result.rows.insert(result.rows.end(), part.rows.begin(), part.rows.end());
            result.optima.insert(result.optima.end(), part.optima.begin(), part.optima.end());
        }
    }
    std::ostringstream csv;
    csv << "budget,gamma,launch_count,retained,prefix_length,task_length,tokens_per_query,cons_at_n,avg_at_m_given_k\n";
    json rows = json::array();
    for (const auto& r : result.rows) {
        csv << r.budget << ',' << num(r.gamma, "%.8g") << ',' << r.launch_count << ',' << r.retained << ','
            << r.prefix_length << ',' << num(r.task_length, "%.1f") << ',' << num(r.tokens_per_query, "%.1f") << ','
            << num(r.cons_at_n, "%.6f") << ',' << num(r.avg_at_m_given_k, "%.6f") << '\n';
        rows.push_back(to_json(r));
    }
    json optima = json::array();
    for (const auto& o : result.optima) optima.push_back(to_json(o));
    const json doc = {{"profile", c.sweep.profile},
                      {"mode", by_budget ? "budget" : "launch_count"},
                      {"rows", rows},
                      {"optima", optima}};
    write_text_file(out_path(c, "sweep.csv"), csv.str());
    write_text_file(out_path(c, "sweep.json"), doc.dump(2) + "\n");
    out << "sweep profile=" << c.sweep.profile << " rows=" << result.rows.size() << " optima=" << result.optima.size()
        << " out=" << out_path(c, "sweep.json").string() << '\n';
}

void cmd_fit_law(const ExperimentConfig& c, std::ostream& out) {
    const json doc = read_json_file(require(c, "sweep.json", "sweep"));
    if (doc.value("mode", "") != "budget") {
        throw ConfigError("sweep.budget_grid: fitting needs a budget-mode sweep (set sweep.budget_grid)");
    }
    std::vector<SweepOptimum> optima;
    for (const auto& o : doc.at("optima")) optima.push_back(sweep_optimum_from_json(o));
    const auto fit = fit_powerlaw(observations_from_optima(optima));
    write_text_file(out_path(c, "coefficients.json"), to_json(fit).dump(2) + "\n");
    out << "fit-law points=" << fit.fit->points << " a=" << num(fit.a) << " b=" << num(fit.b, "%.4f")
        << " c=" << num(fit.c, "%.4f") << " d=" << num(fit.d, "%.4f") << " log_rmse=" << num(fit.fit->log_rmse, "%.4g")
        << " out=" << out_path(c, "coefficients.json").string() << '\n';
}

void cmd_tables(const ExperimentConfig& c, std::ostream& out) {
    ScalingCoefficients coeffs = reference_coefficients();
    if (c.scaling.coefficients == "fitted") {
        coeffs = coefficients_from_json(read_json_file(require(c, "coefficients.json", "fit-law")));
    }
    std::size_t cells = 0;
    const auto layouts = reference_table_layouts();
    for (const auto& l : layouts) {
        const auto t = emit_lookup_table(coeffs, l.task_tokens, l.prefix_grid, l.budget_grid, l.name);
        write_text_file(out_path(c, "tables/" + l.name + ".csv"), t.to_csv());
        write_text_file(out_path(c, "tables/" + l.name + ".txt"), t.to_text());
        cells += t.cell_count();
    }
    out << "tables coefficients=" << c.scaling.coefficients << " tables=" << layouts.size() << " cells=" << cells
        << " out=" << out_path(c, "tables").string() << '\n';
}

void cmd_report(const ExperimentConfig& c, std::ostream& out) {
    const fs::path runs = out_path(c, "runs");
    if (!fs::is_directory(runs)) throw DependencyError("missing " + runs.string() + " (run 'run' first)");
    struct Cell {
        std::string avg;
        std::string reduction;
        std::string tokens;
    };
    std::map<std::string, std::map<std::string, Cell>> table;
    std::vector<std::string> datasets;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(runs)) {
        if (fs::exists(entry.path() / "metrics.csv")) files.push_back(entry.path() / "metrics.csv");
    }
    if (files.empty()) throw DependencyError("no metrics.csv under " + runs.string() + " (run 'run' first)");
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream is(f);
        std::string header;
        std::string line;
        std::getline(is, header);
        const auto cols = split_csv_line(header);
        auto index = [&](const std::string& name) {
            const auto it = std::find(cols.begin(), cols.end(), name);
            if (it == cols.end()) throw IoError(f.string() + ": missing column " + name);
            return static_cast<std::size_t>(it - cols.begin());
        };
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto v = split_csv_line(line);
            if (v.size() != cols.size()) throw IoError(f.string() + ": malformed row");
            const std::string& ds = v[index("dataset")];
            if (std::find(datasets.begin(), datasets.end(), ds) == datasets.end()) datasets.push_back(ds);
            Cell cell;
            cell.avg = v[index("avg_at_m_given_k")].empty()
                           ? "-"
                           : num(100.0 * std::stod(v[index("avg_at_m_given_k")]), "%.2f");
            cell.reduction = v[index("token_reduction_pct")].empty()
                                 ? "-"
                                 : num(std::stod(v[index("token_reduction_pct")]), "%.2f%%");
            cell.tokens = num(std::stod(v[index("tokens_per_query")]) / 1000.0, "%.1fk");
            table[v[index("method")]][ds] = cell;
        }
    }
    std::ostringstream md;
    md << "# Pruning comparison\n\n| Method |";
    for (const auto& d : datasets) md << ' ' << d << " avg@m\\|k | " << d << " tokens/query | " << d << " reduction |";
    md << "\n|---|";
    for (std::size_t i = 0; i < datasets.size(); ++i) md << "---:|---:|---:|";
    md << '\n';
    std::vector<std::string> methods;
    for (const auto& [m, row] : table) methods.push_back(m);
    std::stable_partition(methods.begin(), methods.end(), [](const std::string& m) { return m == "no_pruning"; });
    for (const auto& m : methods) {
        md << "| " << m << " |";
        for (const auto& d : datasets) {
            const auto it = table[m].find(d);
            if (it == table[m].end()) {
                md << " - | - | - |";
            } else {
                md << ' ' << it->second.avg << " | " << it->second.tokens << " | " << it->second.reduction << " |";
            }
        }
        md << '\n';
    }
    write_text_file(out_path(c, "report.md"), md.str());
    out << "report runs=" << files.size() << " methods=" << methods.size() << " datasets=" << datasets.size()
        << " out=" << out_path(c, "report.md").string() << '\n';
}

void run_command(const std::string& name, const ExperimentConfig& config, std::ostream& out) {
    if (name == "simulate") return cmd_simulate(config, out);
    if (name == "label") return cmd_label(config, out);
    if (name == "train") return cmd_train(config, out);
    if (name == "run") return cmd_run(config, out);
    if (name == "sweep") return cmd_sweep(config, out);
    if (name == "fit-law") return cmd_fit_law(config, out);
    if (name == "tables") return cmd_tables(config, out);
    if (name == "report") return cmd_report(config, out);
    throw ArgumentError("unknown command '" + name + "'");
}

}  // namespace prunepath
