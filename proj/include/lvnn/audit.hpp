#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lvnn/curves.hpp"
#include "lvnn/network.hpp"
#include "lvnn/objective.hpp"

namespace lvnn {

inline constexpr double kViolationTol = 1e-6;

struct ViolationReport {
    int n_calendar = 0;
    int n_butterfly = 0;
    int n_points = 0;
    int n_violating = 0;  // distinct points failing either condition
    double fraction = 0.0;
    std::vector<std::pair<double, double>> locations;  // raw (T, k)

    nlohmann::json to_json() const;
};

/**
 * Counts points where dF/dT < -tol (calendar) or d2F/dk2 < -tol (butterfly),
 * derivatives in raw forward units. Points are given in raw (T, k).
 */
ViolationReport count_violations(const NetParams& params, std::span<const double> maturities,
                                 std::span<const double> fwd_strikes, const ScalingBox& box,
                                 double tol = kViolationTol);

// Root-mean-square difference. Throws on length mismatch or empty input.
double rmse(std::span<const double> predicted, std::span<const double> reference);

struct ImpliedVolRmse {
    double rmse = 0.0;
    int n_used = 0;
    int n_failed = 0;  // cells where either inversion failed
};

// Implied-vol RMSE between two price sets on the same quotes; flat rates per
// quote are the curve averages over [0, T]. Rows with T = 0 are skipped.
ImpliedVolRmse implied_vol_rmse(std::span<const double> predicted,
                                std::span<const MarketQuote> reference, double spot,
                                const TermStructure& rate, const TermStructure& dividend);

enum CellFlag : int { kCellValid = 0, kCellGuardBound = 1, kCellNegative = 2 };

// Values on a (maturity x strike) grid; invalid cells hold NaN.
struct SurfaceGrid {
    std::vector<double> maturities;
    std::vector<double> strikes;
    Eigen::MatrixXd values;  // rows: maturities, cols: strikes
    Eigen::MatrixXi flags;

    void validate() const;
    int invalid_count() const;
};

// Network prices converted back to raw put prices P(T, K).
std::vector<double> predict_prices(const NetParams& params, std::span<const MarketQuote> quotes,
                                   const ScalingBox& box, const TermStructure& rate,
                                   const TermStructure& dividend);

SurfaceGrid price_surface(const NetParams& params, std::vector<double> maturities,
                          std::vector<double> strikes, const ScalingBox& box,
                          const TermStructure& rate, const TermStructure& dividend);

/**
 * sigma(T, K) = sqrt(2 dup) from the network's exact sensitivities. Cells
 * where the Dupire denominator hits the guard or dup < 0 are flagged and
 * hold NaN.
 */
SurfaceGrid extract_local_vol(const NetParams& params, std::vector<double> maturities,
                              std::vector<double> strikes, const ScalingBox& box,
                              const TermStructure& rate, const TermStructure& dividend,
                              double guard = kDupireGuard);

// Sigma0 * eps^{-i/alpha} * ln(1/eps). Requires 0 < eps < 1 and alpha, i, Sigma0 > 0.
double sparsity_bound(double eps, double alpha, double input_dim, double sigma0);

// CSV `T,K,value,flag`.
void write_surface_csv(const std::filesystem::path& path, const SurfaceGrid& grid);
// CSV `T,k` of violating points.
void write_violations_csv(const std::filesystem::path& path, const ViolationReport& report);

}  // namespace lvnn
