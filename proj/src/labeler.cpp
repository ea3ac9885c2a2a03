// SPDX-License-Identifier: Apache-2.0
#include "prunepath/labeler.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "prunepath/error.hpp"
#include "prunepath/parallel.hpp"

namespace prunepath {

using nlohmann::json;

std::vector<StratifiedQuery> measure_difficulty(std::span<const QueryRecord> queries, TrajectoryBackend& backend,
                                                const StratifyOptions& options) {
    if (options.rollouts < 1) throw ArgumentError("stratify: rollouts must be positive");
    std::vector<StratifiedQuery> out(queries.size());
    parallel_for(queries.size(), options.jobs, [&](std::size_t qi) {
        const QueryRecord& q = queries[qi];
        int passes = 0;
        for (int j = 0; j < options.rollouts; ++j) {
            const PathRecord launched = backend.launch_prefix(q, kStratifyPathBase + j, options.prefix_length);
            const PathRecord done = backend.resume_path(launched, q);
            passes += done.is_correct.value_or(false) ? 1 : 0;
        }
        out[qi] = {q, passes, passes >= options.lower && passes <= options.upper};
    });
    return out;
}

std::vector<QueryRecord> stratify_queries(std::span<const QueryRecord> queries, TrajectoryBackend& backend,
                                          const StratifyOptions& options) {
    std::vector<QueryRecord> kept;
    for (auto& s : measure_difficulty(queries, backend, options)) {
        if (s.retained) kept.push_back(std::move(s.query));
    }
    return kept;
}

LabeledPrefix mc_label(TrajectoryBackend& backend, const PathRecord& prefix, const QueryRecord& query, int rollouts,
                       std::uint64_t draw) {
    if (rollouts < 1) throw ArgumentError("mc_label: K must be positive");
    if (prefix.status != PathStatus::launched) {
        throw LifecycleError("mc_label: prefix " + prefix.query_id + "/" + std::to_string(prefix.path_id) +
                             " is not in the launched state");
    }
    const auto outcomes = backend.rollout_from_prefix(prefix, query, rollouts, draw);
    LabeledPrefix out;
    out.query_id = prefix.query_id;
    out.path_id = prefix.path_id;
    out.prefix_tokens = prefix.prefix_tokens;
    if (prefix.checkpoint_features) out.features = *prefix.checkpoint_features;
    out.rollouts = rollouts;
    int hits = 0;
    for (const auto& r : outcomes) {
        const bool ok = r.is_correct.value_or(false);
        out.bits.push_back(ok ? 1 : 0);
        hits += ok ? 1 : 0;
    }
    out.s_mc = static_cast<double>(hits) / static_cast<double>(rollouts);
    return out;
}

std::vector<LabeledPrefix> build_dataset(std::span<const QueryRecord> queries, TrajectoryBackend& backend,
                                         const DatasetOptions& options) {
    if (options.prefixes_per_query < 1) throw ArgumentError("build_dataset: prefixes_per_query must be positive");
    const std::size_t per = static_cast<std::size_t>(options.prefixes_per_query);
    std::vector<LabeledPrefix> out(queries.size() * per);
    parallel_for(out.size(), options.jobs, [&](std::size_t cell) {
        const QueryRecord& q = queries[cell / per];
        const int path_id = static_cast<int>(cell % per) + 1;
        const PathRecord prefix = backend.launch_prefix(q, path_id, options.prefix_length);
        out[cell] = mc_label(backend, prefix, q, options.rollouts, options.draw);
    });
    return out;
}

void write_dataset(const std::filesystem::path& file, const DatasetHeader& header,
                   std::span<const LabeledPrefix> records) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot write dataset file " + file.string());
    json h = {{"type", "header"},
              {"format", "prunepath.labels"},
              {"version", 1},
              {"backend", header.backend},
              {"seed", header.seed},
              {"K", header.rollouts},
              {"prefix_length", header.prefix_length},
              {"feature_dim", header.feature_dim},
              {"records", records.size()}};
    os << h.dump() << '\n';
    for (const auto& r : records) {
        std::string bits;
        bits.reserve(r.bits.size());
        for (auto b : r.bits) bits.push_back(b ? '1' : '0');
        json line = {{"query_id", r.query_id}, {"path_id", r.path_id}, {"prefix_tokens", r.prefix_tokens},
                     {"features", r.features}, {"s_mc", r.s_mc},       {"K", r.rollouts},
                     {"bits", bits}};
        os << line.dump() << '\n';
    }
    if (!os) throw IoError("failed while writing dataset file " + file.string());
}

Dataset read_dataset(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot read dataset file " + file.string());
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (j.value("type", "") != "header") {
                    throw IoError(file.string() + ": first record must be the header");
                }
                ds.header.backend = j.value("backend", "");
                ds.header.seed = j.at("seed").get<std::uint64_t>();
                ds.header.rollouts = j.at("K").get<int>();
                ds.header.prefix_length = j.at("prefix_length").get<std::int64_t>();
                ds.header.feature_dim = j.at("feature_dim").get<std::size_t>();
                ds.header.record_count = j.value("records", std::size_t{0});
                have_header = true;
                continue;
            }
            LabeledPrefix r;
            r.query_id = j.at("query_id").get<std::string>();
            r.path_id = j.at("path_id").get<int>();
            r.prefix_tokens = j.value("prefix_tokens", std::int64_t{0});
            r.features = j.at("features").get<std::vector<double>>();
            r.s_mc = j.at("s_mc").get<double>();
            r.rollouts = j.at("K").get<int>();
            for (char c : j.value("bits", std::string())) r.bits.push_back(c == '1' ? 1 : 0);
            ds.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw IoError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw IoError(file.string() + ": missing header record");
    return ds;
}

std::vector<TrainingExample> to_training_examples(std::span<const LabeledPrefix> records) {
    std::vector<TrainingExample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.query_id, r.path_id, r.features, r.s_mc});
    return out;
}

}  // namespace prunepath
