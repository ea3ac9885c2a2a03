// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunepath/core.hpp"
#include "prunepath/pipeline.hpp"
#include "prunepath/scaling.hpp"
#include "prunepath/signals.hpp"

namespace prunepath {

using nlohmann::json;

json to_json(const QueryRecord& q);
QueryRecord query_from_json(const json& j);

/// Path without token streams unless `with_streams`.
json to_json(const PathRecord& p, bool with_streams = false);
json to_json(const SignalScore& s);
json to_json(const BudgetLedger& ledger);
json to_json(const MetricsReport& m);
json to_json(const SweepRow& r);
json to_json(const SweepOptimum& o);
SweepRow sweep_row_from_json(const json& j);
SweepOptimum sweep_optimum_from_json(const json& j);

/// Versioned document {"format": "prunepath.scorer", "version": 1, ...}.
json to_json(const ScorerModel& m);
ScorerModel scorer_from_json(const json& j);

json to_json(const ScalingCoefficients& c);
ScalingCoefficients coefficients_from_json(const json& j);

std::vector<QueryRecord> read_queries(const std::filesystem::path& file);
void write_queries(const std::filesystem::path& file, std::span<const QueryRecord> queries);

json read_json_file(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file, const std::string& text);

}  // namespace prunepath
