// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prunepath {

/// Planning law for the inverse retention ratio:
///
///   1/gamma = a * C^b * Lp^c / Lt^d
///
/// with the budget C, prefix length Lp and task length Lt measured in units of
/// 1024 tokens.
struct ScalingCoefficients {
    double a = 1.17e4;
    double b = 0.46;
    double c = 0.40;
    double d = 4.55;

    struct Fit {
        double log_rmse = 0.0;
        std::size_t points = 0;
    };
    // Present iff the coefficients came out of fit_powerlaw.
    std::optional<Fit> fit;

    void validate() const;
};

/// The published fit.
inline ScalingCoefficients reference_coefficients() { return {}; }

inline constexpr double kScalingUnitTokens = 1024.0;

struct PlanQuery {
    double budget_tokens = 0.0;
    double prefix_tokens = 0.0;
    double task_tokens = 0.0;
};

double predict_inverse_gamma(const PlanQuery& query, const ScalingCoefficients& coeffs);

/// gamma = 1 / inverse, clamped to (0, 1].
double gamma_from_inverse(double inverse_gamma);

struct PowerLawObservation {
    double budget_tokens = 0.0;
    double prefix_tokens = 0.0;
    double task_tokens = 0.0;
    double inverse_gamma = 0.0;
};

/// OLS on log(1/gamma) = log a + b log C + c log Lp - d log Lt.
/// Throws CollinearityError when the design is rank deficient (fewer than four
/// observations, or a regressor without spread or linearly dependent on the
/// others); the message names the offending regressor.
ScalingCoefficients fit_powerlaw(std::span<const PowerLawObservation> observations);

struct LookupTable {
    std::string name;
    double task_tokens = 0.0;
    std::vector<std::int64_t> prefix_grid;
    std::vector<std::uint64_t> budget_grid;
    // values[row = prefix][col = budget]
    std::vector<std::vector<double>> values;

    std::size_t cell_count() const { return prefix_grid.size() * budget_grid.size(); }
    std::string to_csv() const;
    std::string to_text() const;
};

LookupTable emit_lookup_table(const ScalingCoefficients& coeffs, double task_tokens,
                              std::span<const std::int64_t> prefix_grid, std::span<const std::uint64_t> budget_grid,
                              std::string name = {});

/// Grids of the two reference tables: short-horizon (science, L_task 8650)
/// and long-horizon (math, L_task 11950).
struct TableLayout {
    std::string name;
    double task_tokens;
    std::vector<std::int64_t> prefix_grid;
    std::vector<std::uint64_t> budget_grid;
};
std::vector<TableLayout> reference_table_layouts();

}  // namespace prunepath
