// SPDX-License-Identifier: Apache-2.0
#include "prunepath/scaling.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Dense>

#include "prunepath/error.hpp"

namespace prunepath {

namespace {

constexpr std::array<const char*, 4> kRegressors{"intercept", "budget", "prefix_length", "task_length"};

std::string budget_label(std::uint64_t tokens) {
    if (tokens % 1000 == 0) return std::to_string(tokens / 1000) + "k";
    return std::to_string(tokens);
}

}  // namespace

void ScalingCoefficients::validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) throw ArgumentError("scaling coefficient a must be positive");
    if (!std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d)) {
        throw ArgumentError("scaling exponents must be finite");
    }
}

double predict_inverse_gamma(const PlanQuery& q, const ScalingCoefficients& coeffs) {
    coeffs.validate();
    if (!(q.budget_tokens > 0.0) || !(q.prefix_tokens > 0.0) || !(q.task_tokens > 0.0)) {
        throw ArgumentError("predict_inverse_gamma: budget, prefix and task lengths must be positive");
    }
    const double C = q.budget_tokens / kScalingUnitTokens;
    const double Lp = q.prefix_tokens / kScalingUnitTokens;
    const double Lt = q.task_tokens / kScalingUnitTokens;
    return coeffs.a * std::pow(C, coeffs.b) * std::pow(Lp, coeffs.c) / std::pow(Lt, coeffs.d);
}

double gamma_from_inverse(double inverse_gamma) {
    if (!(inverse_gamma > 0.0)) throw ArgumentError("gamma_from_inverse: inverse ratio must be positive");
    return std::min(1.0, 1.0 / inverse_gamma);
}

ScalingCoefficients fit_powerlaw(std::span<const PowerLawObservation> observations) {
    const auto n = static_cast<Eigen::Index>(observations.size());
    if (n < 4) {
        throw CollinearityError("fit_powerlaw: " + std::to_string(n) +
                                " observations cannot identify 4 coefficients");
    }
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = observations[static_cast<std::size_t>(i)];
        if (!(o.budget_tokens > 0.0) || !(o.prefix_tokens > 0.0) || !(o.task_tokens > 0.0) ||
            !(o.inverse_gamma > 0.0)) {
            throw ArgumentError("fit_powerlaw: observation " + std::to_string(i) + " has a nonpositive entry");
        }
        X(i, 0) = 1.0;
        X(i, 1) = std::log(o.budget_tokens / kScalingUnitTokens);
        X(i, 2) = std::log(o.prefix_tokens / kScalingUnitTokens);
        X(i, 3) = -std::log(o.task_tokens / kScalingUnitTokens);
        y(i) = std::log(o.inverse_gamma);
    }

    // A regressor without spread is collinear with the intercept.
    for (int j = 1; j < 4; ++j) {
        const double mean = X.col(j).mean();
        if ((X.col(j).array() - mean).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(mean))) {
            throw CollinearityError(std::string("fit_powerlaw: regressor '") + kRegressors[static_cast<std::size_t>(j)] +
                                    "' has no spread");
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) {
        // Name a regressor whose removal keeps the rank: it is spanned by the rest.
        std::string culprit = "unknown";
        for (int j = 3; j >= 1; --j) {
            Eigen::MatrixXd reduced(n, 3);
            int c = 0;
            for (int k = 0; k < 4; ++k) {
                if (k != j) reduced.col(c++) = X.col(k);
            }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rq(reduced);
            rq.setThreshold(1e-10);
            if (rq.rank() == qr.rank()) {
                culprit = kRegressors[static_cast<std::size_t>(j)];
                break;
            }
        }
        throw CollinearityError("fit_powerlaw: design is rank deficient; regressor '" + culprit +
                                "' is linearly dependent on the others");
    }
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta;

    ScalingCoefficients out;
    out.a = std::exp(beta(0));
    out.b = beta(1);
    out.c = beta(2);
    out.d = beta(3);
    out.fit = ScalingCoefficients::Fit{std::sqrt(resid.squaredNorm() / static_cast<double>(n)),
                                       static_cast<std::size_t>(n)};
    return out;
}

LookupTable emit_lookup_table(const ScalingCoefficients& coeffs, double task_tokens,
                              std::span<const std::int64_t> prefix_grid, std::span<const std::uint64_t> budget_grid,
                              std::string name) {
    if (prefix_grid.empty() || budget_grid.empty()) throw ArgumentError("emit_lookup_table: empty grid");
    LookupTable t;
    t.name = std::move(name);
    t.task_tokens = task_tokens;
    t.prefix_grid.assign(prefix_grid.begin(), prefix_grid.end());
    t.budget_grid.assign(budget_grid.begin(), budget_grid.end());
    for (auto lp : prefix_grid) {
        std::vector<double> row;
        row.reserve(budget_grid.size());
        for (auto c : budget_grid) {
            row.push_back(predict_inverse_gamma(
                {static_cast<double>(c), static_cast<double>(lp), task_tokens}, coeffs));
        }
        t.values.push_back(std::move(row));
    }
    return t;
}

std::string LookupTable::to_csv() const {
    std::ostringstream os;
    os << "L_prefix";
    for (auto c : budget_grid) os << ',' << c;
    os << '\n';
    char buf[32];
    for (std::size_t r = 0; r < prefix_grid.size(); ++r) {
        os << prefix_grid[r];
        for (double v : values[r]) {
            std::snprintf(buf, sizeof buf, "%.4f", v);
            os << ',' << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::string LookupTable::to_text() const {
    std::ostringstream os;
    char buf[64];
    if (!name.empty()) {
        std::snprintf(buf, sizeof buf, "%.0f", task_tokens);
        os << name << " (L_task = " << buf << ")\n";
    }
    std::snprintf(buf, sizeof buf, "%10s", "L_prefix");
    os << buf;
    for (auto c : budget_grid) {
        std::snprintf(buf, sizeof buf, "%8s", budget_label(c).c_str());
        os << buf;
    }
    os << '\n';
    for (std::size_t r = 0; r < prefix_grid.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%10lld", static_cast<long long>(prefix_grid[r]));
        os << buf;
        for (double v : values[r]) {
            std::snprintf(buf, sizeof buf, "%8.2f", v);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::vector<TableLayout> reference_table_layouts() {
    std::vector<TableLayout> out;
    TableLayout science{"science_short_horizon", 8650.0, {512, 1024, 1536, 2048, 2560}, {}};
    for (std::uint64_t c = 140'000; c <= 300'000; c += 20'000) science.budget_grid.push_back(c);
    TableLayout math{"math_long_horizon", 11950.0, {1024, 2048, 3072, 4096, 5120}, {}};
    for (std::uint64_t c = 200'000; c <= 600'000; c += 50'000) math.budget_grid.push_back(c);
    out.push_back(std::move(science));
    out.push_back(std::move(math));
    return out;
}

}  // namespace prunepath
