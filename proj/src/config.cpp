// SPDX-License-Identifier: Apache-2.0
#include "prunepath/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "prunepath/error.hpp"
#include "prunepath/random.hpp"
#include "prunepath/serialize.hpp"

namespace prunepath {

std::uint64_t ExperimentConfig::backend_seed() const { return derive_seed(seed, "backend"); }
std::uint64_t ExperimentConfig::labeler_seed() const { return derive_seed(seed, "labeler"); }
std::uint64_t ExperimentConfig::trainer_seed() const { return derive_seed(seed, "trainer"); }
std::uint64_t ExperimentConfig::signal_seed() const { return derive_seed(seed, "signal"); }

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw ConfigError("--set: empty component in key '" + key + "'");
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError(key + ": cannot descend into a non-object");
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

namespace {

// Reads an object and remembers which keys were consumed.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError(where() + "expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

    template <class T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!has(key)) return;
        try {
            out = doc_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(key_path(key) + ": unexpected type " + std::string(doc_.at(key).type_name()));
        }
    }

    template <class T>
    void read_optional(const std::string& key, std::optional<T>& out) {
        seen_.insert(key);
        if (!has(key)) {
            out.reset();
            return;
        }
        T v{};
        read(key, v);
        out = v;
    }

    Section child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Section(has(key) ? doc_.at(key) : empty, key_path(key));
    }

    // Rejects keys that were never read.
    void finish() const {
        for (const auto& [k, v] : doc_.items()) {
            if (!seen_.count(k)) throw ConfigError(key_path(k) + ": unknown key");
        }
    }

    // Runs a validator and prefixes its message with this section's path.
    template <class F>
    void validate(F&& f) const {
        try {
            f();
        } catch (const ConfigError& e) {
            throw ConfigError(path_ + ": " + e.what());
        } catch (const ArgumentError& e) {
            throw ConfigError(path_ + ": " + e.what());
        }
    }

    const std::string& path() const { return path_; }

private:
    std::string where() const { return path_.empty() ? "" : path_ + ": "; }
    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_sim(Section s, SimConfig& c) {
    s.read("feature_dim", c.feature_dim);
    s.read("informative_features", c.informative_features);
    s.read("vocab_size", c.vocab_size);
    s.read("length_mean", c.length_mean);
    s.read("length_sigma", c.length_sigma);
    s.read("difficulty_alpha", c.difficulty_alpha);
    s.read("difficulty_beta", c.difficulty_beta);
    s.read("path_concentration", c.path_concentration);
    s.read("confidence_miscalibration", c.confidence_miscalibration);
    s.read("feature_noise", c.feature_noise);
    s.read("distractor_count", c.distractor_count);
    s.read("distractor_zipf", c.distractor_zipf);
    s.read("judge_noise", c.judge_noise);
    s.read("materialize_completions", c.materialize_completions);
    s.finish();
    s.validate([&] { c.validate(); });
}

void read_endpoint(Section s, EndpointConfig& c) {
    s.read("base_url", c.base_url);
    s.read("model_name", c.model_name);
    s.read("api_key_env_var", c.api_key_env_var);
    s.read("temperature", c.temperature);
    s.read("top_p", c.top_p);
    s.read("top_k", c.top_k);
    s.read("resume_max_tokens", c.resume_max_tokens);
    s.read("timeout_seconds", c.timeout_seconds);
    s.read("retries", c.retries);
    s.read("backoff_ms", c.backoff_ms);
    s.read("max_in_flight", c.max_in_flight);
    s.finish();
    s.validate([&] { c.validate(); });
}

void read_generator(Section s, GeneratorSettings& g) {
    std::string kind = std::string(to_string(g.kind));
    s.read("kind", kind);
    try {
        g.kind = generator_kind_from_string(kind);
    } catch (const std::exception& e) {
        throw ConfigError(s.key_path("kind") + ": " + e.what());
    }
    {
        Section h = s.child("heuristic");
        h.read("ngram", g.heuristic.ngram);
        h.read("chunk_tokens", g.heuristic.chunk_tokens);
        h.finish();
        if (g.heuristic.ngram < 1) throw ConfigError(h.key_path("ngram") + ": must be >= 1");
        if (g.heuristic.chunk_tokens < 1) throw ConfigError(h.key_path("chunk_tokens") + ": must be >= 1");
    }
    {
        Section c = s.child("confidence");
        c.read("window", g.confidence.window);
        c.finish();
        if (g.confidence.window < 0) throw ConfigError(c.key_path("window") + ": must be >= 0");
    }
    {
        Section l = s.child("learned");
        l.read("super_tokens", g.learned.super_tokens);
        l.finish();
    }
    s.finish();
}

void read_run(Section s, ExperimentConfig& c) {
    s.read("name", c.run_name);
    s.read("baseline", c.run_baseline);
    s.read("launch_count", c.run.launch_count);
    s.read_optional("budget_cap", c.run.budget_cap);
    s.read("query_batch", c.run.query_batch);
    s.read("keep_token_streams", c.run.keep_token_streams);
    {
        Section r = s.child("retention");
        r.read("prefix_length", c.run.retention.prefix_length);
        // The default k applies only when neither count nor ratio is given.
        if (r.has("retain_count") || r.has("retain_ratio")) {
            r.read_optional("retain_count", c.run.retention.retain_count);
            r.read_optional("retain_ratio", c.run.retention.retain_ratio);
        } else {
            r.read_optional("retain_count", c.run.retention.retain_count);
            c.run.retention.retain_count = RunSpec{}.retention.retain_count;
            r.read_optional("retain_ratio", c.run.retention.retain_ratio);
        }
        r.finish();
        r.validate([&] { c.run.retention.validate(); });
    }
    read_generator(s.child("generator"), c.run.generator);
    s.finish();
    if (c.run.query_batch < 1) throw ConfigError(s.key_path("query_batch") + ": must be >= 1");
    s.validate([&] { c.run.validate(); });
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig c;
    Section root(doc, "");
    root.read("seed", c.seed);
    root.read("out_dir", c.out_dir);
    root.read("jobs", c.jobs);
    if (c.jobs < 1) throw ConfigError("jobs: must be >= 1");

    Section backend = root.child("backend");
    const bool has_sim = backend.has("sim");
    const bool has_endpoint = backend.has("endpoint");
    if (has_sim == has_endpoint) {
        throw ConfigError("backend: configure exactly one of backend.sim and backend.endpoint");
    }
    if (has_sim) {
        c.sim.emplace();
        read_sim(backend.child("sim"), *c.sim);
        backend.child("endpoint");
    } else {
        c.endpoint.emplace();
        read_endpoint(backend.child("endpoint"), *c.endpoint);
        backend.child("sim");
    }
    backend.finish();

    {
        Section q = root.child("queries");
        q.read("eval_count", c.queries.eval_count);
        q.read("train_count", c.queries.train_count);
        q.read("eval_file", c.queries.eval_file);
        q.read("train_file", c.queries.train_file);
        q.read("prompt_suffix", c.queries.prompt_suffix);
        q.read("dataset_name", c.queries.dataset_name);
        q.finish();
        if (c.endpoint && c.queries.eval_file.empty()) {
            throw ConfigError(q.key_path("eval_file") + ": required with backend.endpoint");
        }
    }

    read_run(root.child("run"), c);

    {
        Section l = root.child("labeler");
        l.read("K", c.labeler.rollouts);
        l.read("lower", c.labeler.lower);
        l.read("upper", c.labeler.upper);
        l.read("stratify_rollouts", c.labeler.stratify_rollouts);
        l.read("stratify", c.labeler.stratify);
        l.read("prefix_length", c.labeler.prefix_length);
        l.read("prefixes_per_query", c.labeler.prefixes_per_query);
        l.finish();
        if (c.labeler.rollouts < 1) throw ConfigError(l.key_path("K") + ": must be >= 1");
        if (c.labeler.stratify_rollouts < 1) throw ConfigError(l.key_path("stratify_rollouts") + ": must be >= 1");
        if (c.labeler.lower < 0 || c.labeler.lower > c.labeler.upper) {
            throw ConfigError(l.key_path("lower") + ": need 0 <= lower <= upper");
        }
        if (c.labeler.prefix_length < 1) throw ConfigError(l.key_path("prefix_length") + ": must be >= 1");
        if (c.labeler.prefixes_per_query < 1) throw ConfigError(l.key_path("prefixes_per_query") + ": must be >= 1");
    }

    {
        Section t = root.child("trainer");
        t.read("learning_rate", c.trainer.learning_rate);
        t.read("batch_size", c.trainer.batch_size);
        t.read("epochs", c.trainer.epochs);
        t.read("hidden_width", c.trainer.hidden_width);
        t.read("use_adapter", c.trainer.use_adapter);
        t.read("patience", c.trainer.patience);
        t.read("validation_fraction", c.trainer.validation_fraction);
        t.finish();
        t.validate([&] { c.trainer.validate(); });
    }

    {
        Section s = root.child("sweep");
        s.read("profile", c.sweep.profile);
        s.read("gamma_grid", c.sweep.gamma_grid);
        s.read("gamma_points", c.sweep.gamma_points);
        s.read("budget_grid", c.sweep.budget_grid);
        s.read("n_grid", c.sweep.n_grid);
        s.read("prefix_grid", c.sweep.prefix_grid);
        s.read("task_grid", c.sweep.task_grid);
        if (s.has("planted")) {
            try {
                c.sweep.planted = coefficients_from_json(doc.at("sweep").at("planted"));
            } catch (const ConfigError& e) {
                throw ConfigError(s.key_path("planted") + ": " + e.what());
            }
        }
        s.child("planted");
        s.finish();
        if (c.sweep.profile != "sim" && c.sweep.profile != "synthetic_powerlaw") {
            throw ConfigError(s.key_path("profile") + ": expected 'sim' or 'synthetic_powerlaw'");
        }
        if (c.sweep.gamma_grid.empty()) throw ConfigError(s.key_path("gamma_grid") + ": must be nonempty");
        for (double g : c.sweep.gamma_grid) {
            if (!(g > 0.0 && g <= 1.0)) throw ConfigError(s.key_path("gamma_grid") + ": values must lie in (0,1]");
        }
        if (c.sweep.gamma_points < 0 || c.sweep.gamma_points == 1) {
            throw ConfigError(s.key_path("gamma_points") + ": must be 0 or >= 2");
        }
        if (c.sweep.gamma_points > 0) {
            const auto [lo, hi] = std::minmax_element(c.sweep.gamma_grid.begin(), c.sweep.gamma_grid.end());
            const double a = std::log(*lo);
            const double b = std::log(*hi);
            std::vector<double> dense;
            for (int i = 0; i < c.sweep.gamma_points; ++i) {
                dense.push_back(std::exp(a + (b - a) * i / (c.sweep.gamma_points - 1)));
            }
            c.sweep.gamma_grid = std::move(dense);
            c.sweep.gamma_points = 0;
        }
        if (c.sweep.profile == "synthetic_powerlaw" &&
            (c.sweep.budget_grid.empty() || c.sweep.prefix_grid.empty() || c.sweep.task_grid.empty())) {
            throw ConfigError(s.key_path("budget_grid") +
                              ": synthetic_powerlaw needs budget_grid, prefix_grid and task_grid");
        }
    }

    {
        Section s = root.child("scaling");
        s.read("coefficients", c.scaling.coefficients);
        s.finish();
        if (c.scaling.coefficients != "reference" && c.scaling.coefficients != "fitted") {
            throw ConfigError(s.key_path("coefficients") + ": expected 'reference' or 'fitted'");
        }
    }
    root.finish();

    c.run.seed = c.seed;
    c.run.jobs = c.jobs;
    c.run.generator.random_seed = c.signal_seed();
    if (c.sim) c.sim->seed = c.backend_seed();
    c.trainer.seed = c.trainer_seed();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["jobs"] = c.jobs;
    if (c.sim) {
        const auto& s = *c.sim;
        j["backend"]["sim"] = {{"feature_dim", s.feature_dim},
                               {"informative_features", s.informative_features},
                               {"vocab_size", s.vocab_size},
                               {"length_mean", s.length_mean},
                               {"length_sigma", s.length_sigma},
                               {"difficulty_alpha", s.difficulty_alpha},
                               {"difficulty_beta", s.difficulty_beta},
                               {"path_concentration", s.path_concentration},
                               {"confidence_miscalibration", s.confidence_miscalibration},
                               {"feature_noise", s.feature_noise},
                               {"distractor_count", s.distractor_count},
                               {"distractor_zipf", s.distractor_zipf},
                               {"judge_noise", s.judge_noise},
                               {"materialize_completions", s.materialize_completions}};
    } else {
        const auto& e = *c.endpoint;
        j["backend"]["endpoint"] = {{"base_url", e.base_url},
                                    {"model_name", e.model_name},
                                    {"api_key_env_var", e.api_key_env_var},
                                    {"temperature", e.temperature},
                                    {"top_p", e.top_p},
                                    {"top_k", e.top_k},
                                    {"resume_max_tokens", e.resume_max_tokens},
                                    {"timeout_seconds", e.timeout_seconds},
                                    {"retries", e.retries},
                                    {"backoff_ms", e.backoff_ms},
                                    {"max_in_flight", e.max_in_flight}};
    }
    j["queries"] = {{"eval_count", c.queries.eval_count},   {"train_count", c.queries.train_count},
                    {"eval_file", c.queries.eval_file},     {"train_file", c.queries.train_file},
                    {"prompt_suffix", c.queries.prompt_suffix}, {"dataset_name", c.queries.dataset_name}};
    json retention = {{"prefix_length", c.run.retention.prefix_length}};
    if (c.run.retention.retain_count) retention["retain_count"] = *c.run.retention.retain_count;
    if (c.run.retention.retain_ratio) retention["retain_ratio"] = *c.run.retention.retain_ratio;
    const auto& g = c.run.generator;
    j["run"] = {{"name", c.run_name},
                {"baseline", c.run_baseline},
                {"launch_count", c.run.launch_count},
                {"query_batch", c.run.query_batch},
                {"keep_token_streams", c.run.keep_token_streams},
                {"retention", retention},
                {"generator",
                 {{"kind", to_string(g.kind)},
                  {"heuristic", {{"ngram", g.heuristic.ngram}, {"chunk_tokens", g.heuristic.chunk_tokens}}},
                  {"confidence", {{"window", g.confidence.window}}},
                  {"learned", {{"super_tokens", g.learned.super_tokens}}}}}};
    if (c.run.budget_cap) j["run"]["budget_cap"] = *c.run.budget_cap;
    j["labeler"] = {{"K", c.labeler.rollouts},
                    {"lower", c.labeler.lower},
                    {"upper", c.labeler.upper},
                    {"stratify_rollouts", c.labeler.stratify_rollouts},
                    {"stratify", c.labeler.stratify},
                    {"prefix_length", c.labeler.prefix_length},
                    {"prefixes_per_query", c.labeler.prefixes_per_query}};
    j["trainer"] = {{"learning_rate", c.trainer.learning_rate},
                    {"batch_size", c.trainer.batch_size},
                    {"epochs", c.trainer.epochs},
                    {"hidden_width", c.trainer.hidden_width},
                    {"use_adapter", c.trainer.use_adapter},
                    {"patience", c.trainer.patience},
                    {"validation_fraction", c.trainer.validation_fraction}};
    json planted = to_json(c.sweep.planted);
    planted.erase("unit_tokens");
    j["sweep"] = {{"profile", c.sweep.profile},         {"gamma_grid", c.sweep.gamma_grid},
                  {"gamma_points", c.sweep.gamma_points},
                  {"budget_grid", c.sweep.budget_grid}, {"n_grid", c.sweep.n_grid},
                  {"prefix_grid", c.sweep.prefix_grid}, {"task_grid", c.sweep.task_grid},
                  {"planted", planted}};
    j["scaling"] = {{"coefficients", c.scaling.coefficients}};
    return j;
}

}  // namespace prunepath
