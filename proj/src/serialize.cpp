// SPDX-License-Identifier: Apache-2.0
#include "prunepath/serialize.hpp"

#include <fstream>
#include <sstream>

#include "prunepath/error.hpp"

namespace prunepath {

json to_json(const QueryRecord& q) {
    json j = {{"query_id", q.query_id}, {"prompt", q.prompt}, {"gold_answer", q.gold_answer},
              {"task_length_ref", q.task_length_ref}};
    if (q.base_success_prob) j["base_success_prob"] = *q.base_success_prob;
    return j;
}

QueryRecord query_from_json(const json& j) {
    QueryRecord q;
    q.query_id = j.at("query_id").get<std::string>();
    q.prompt = j.value("prompt", "");
    q.gold_answer = j.at("gold_answer").get<std::string>();
    q.task_length_ref = j.value("task_length_ref", std::int64_t{1});
    if (j.contains("base_success_prob")) q.base_success_prob = j["base_success_prob"].get<double>();
    q.validate();
    return q;
}

json to_json(const PathRecord& p, bool with_streams) {
    json j = {{"query_id", p.query_id},       {"path_id", p.path_id},
              {"status", to_string(p.status)}, {"prefix_tokens", p.prefix_tokens},
              {"token_count", p.token_count},  {"finished_early", p.finished_early}};
    j["answer"] = p.answer ? json(*p.answer) : json(nullptr);
    j["is_correct"] = p.is_correct ? json(*p.is_correct) : json(nullptr);
    if (p.success_prob) j["success_prob"] = *p.success_prob;
    if (p.latent_quality) j["latent_quality"] = *p.latent_quality;
    if (with_streams) {
        j["tokens"] = p.tokens;
        j["token_logprobs"] = p.token_logprobs;
        if (p.checkpoint_features) j["checkpoint_features"] = *p.checkpoint_features;
        if (!p.text.empty()) j["text"] = p.text;
    }
    return j;
}

json to_json(const SignalScore& s) {
    return {{"path_id", s.path_id},
            {"value", s.value},
            {"generator_kind", to_string(s.generator_kind)},
            {"check_cost_tokens", s.check_cost_tokens}};
}

json to_json(const BudgetLedger& l) {
    return {{"prefix_tokens", l.prefix_tokens()},
            {"resume_tokens", l.resume_tokens()},
            {"check_tokens", l.check_tokens()},
            {"total", l.total()}};
}

json to_json(const MetricsReport& m) {
    json j = {{"avg_at_m_given_k", m.avg_at_m_given_k}, {"cons_at_n", m.cons_at_n}};
    j["avg_at_k"] = m.avg_at_k ? json(*m.avg_at_k) : json(nullptr);
    j["token_reduction_pct"] = m.token_reduction_pct ? json(*m.token_reduction_pct) : json(nullptr);
    json rows = json::array();
    for (const auto& b : m.per_query_breakdown) {
        json r = {{"query_id", b.query_id},
                  {"retained_path_ids", b.retained_path_ids},
                  {"path_accuracy", b.path_accuracy},
                  {"tokens", b.tokens}};
        r["voted_answer"] = b.voted_answer ? json(*b.voted_answer) : json(nullptr);
        r["vote_correct"] = b.vote_correct ? json(*b.vote_correct) : json(nullptr);
        if (!b.error.empty()) r["error"] = b.error;
        rows.push_back(std::move(r));
    }
    j["per_query_breakdown"] = std::move(rows);
    return j;
}

json to_json(const SweepRow& r) {
    return {{"budget", r.budget},
            {"gamma", r.gamma},
            {"launch_count", r.launch_count},
            {"retained", r.retained},
            {"prefix_length", r.prefix_length},
            {"task_length", r.task_length},
            {"tokens_per_query", r.tokens_per_query},
            {"cons_at_n", r.cons_at_n},
            {"avg_at_m_given_k", r.avg_at_m_given_k}};
}

SweepRow sweep_row_from_json(const json& j) {
    SweepRow r;
    r.budget = j.at("budget").get<std::uint64_t>();
    r.gamma = j.at("gamma").get<double>();
    r.launch_count = j.value("launch_count", 0);
    r.retained = j.value("retained", 0);
    r.prefix_length = j.at("prefix_length").get<std::int64_t>();
    r.task_length = j.at("task_length").get<double>();
    r.tokens_per_query = j.value("tokens_per_query", 0.0);
    r.cons_at_n = j.at("cons_at_n").get<double>();
    r.avg_at_m_given_k = j.value("avg_at_m_given_k", 0.0);
    return r;
}

json to_json(const SweepOptimum& o) {
    return {{"bucket", o.bucket},
            {"gamma", o.gamma},
            {"accuracy", o.accuracy},
            {"prefix_length", o.prefix_length},
            {"task_length", o.task_length}};
}

SweepOptimum sweep_optimum_from_json(const json& j) {
    return {j.at("bucket").get<std::uint64_t>(), j.at("gamma").get<double>(), j.at("accuracy").get<double>(),
            j.at("prefix_length").get<std::int64_t>(), j.at("task_length").get<double>()};
}

json to_json(const ScorerModel& m) {
    return {{"format", "prunepath.scorer"},
            {"version", 1},
            {"feature_dim", m.feature_dim},
            {"hidden_width", m.hidden_width},
            {"use_adapter", m.use_adapter},
            {"input_mean", m.input_mean},
            {"input_scale", m.input_scale},
            {"adapter_weights", m.adapter_weights},
            {"adapter_bias", m.adapter_bias},
            {"head_weights", m.head_weights},
            {"head_bias", m.head_bias}};
}

ScorerModel scorer_from_json(const json& j) {
    if (j.value("format", "") != "prunepath.scorer") throw ConfigError("model: not a prunepath.scorer document");
    if (j.value("version", 0) != 1) {
        throw ConfigError("model: unsupported version " + std::to_string(j.value("version", 0)));
    }
    ScorerModel m;
    try {
        m.feature_dim = j.at("feature_dim").get<std::size_t>();
        m.hidden_width = j.at("hidden_width").get<std::size_t>();
        m.use_adapter = j.at("use_adapter").get<bool>();
        m.input_mean = j.at("input_mean").get<std::vector<double>>();
        m.input_scale = j.at("input_scale").get<std::vector<double>>();
        m.adapter_weights = j.at("adapter_weights").get<std::vector<double>>();
        m.adapter_bias = j.at("adapter_bias").get<std::vector<double>>();
        m.head_weights = j.at("head_weights").get<std::vector<double>>();
        m.head_bias = j.at("head_bias").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    m.validate();
    return m;
}

json to_json(const ScalingCoefficients& c) {
    json j = {{"a", c.a}, {"b", c.b}, {"c", c.c}, {"d", c.d}, {"unit_tokens", kScalingUnitTokens}};
    if (c.fit) j["fit"] = {{"log_rmse", c.fit->log_rmse}, {"points", c.fit->points}};
    return j;
}

ScalingCoefficients coefficients_from_json(const json& j) {
    ScalingCoefficients c;
    try {
        c.a = j.at("a").get<double>();
        c.b = j.at("b").get<double>();
        c.c = j.at("c").get<double>();
        c.d = j.at("d").get<double>();
        if (j.contains("fit")) {
            c.fit = ScalingCoefficients::Fit{j["fit"].at("log_rmse").get<double>(),
                                             j["fit"].at("points").get<std::size_t>()};
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("coefficients: ") + e.what());
    }
    c.validate();
    return c;
}

std::vector<QueryRecord> read_queries(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw IoError("cannot read query file " + file.string());
    std::vector<QueryRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(query_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw IoError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_queries(const std::filesystem::path& file, std::span<const QueryRecord> queries) {
    std::ostringstream os;
    for (const auto& q : queries) os << to_json(q).dump() << '\n';
    write_text_file(file, os.str());
}

json read_json_file(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw IoError("cannot read " + file.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw IoError(file.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot write " + file.string());
    os << text;
    if (!os) throw IoError("failed while writing " + file.string());
}

}  // namespace prunepath
