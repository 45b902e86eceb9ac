#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lvnn/audit.hpp"
#include "lvnn/curves.hpp"
#include "lvnn/network.hpp"
#include "lvnn/objective.hpp"
#include "lvnn/pricers.hpp"

namespace lvnn {

struct McConfig {
    long n_paths = 100000;
    int n_steps = 100;
    std::uint64_t seed = 1;
    bool antithetic = false;

    void validate() const;
    nlohmann::json to_json() const;
};

// Counter-based normal stream: draw n of path p depends only on (seed, p, n).
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path);
    std::uint64_t next_u64();
    double next_normal();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Terminal spots at each requested maturity (snapped to the step grid).
struct PathSet {
    std::vector<double> maturities;  // as requested
    std::vector<int> step_index;     // snapped step per maturity
    double dt = 0.0;
    Eigen::MatrixXd terminal;        // n_paths x n_maturities
    bool antithetic = false;
};

/**
 * Log-Euler simulation of dS/S = (r - q) dt + sigma(t, S) dW on a uniform
 * grid of cfg.n_steps steps over [0, horizon]. The drift uses the exact
 * curve integral over each step; sigma is taken at the start of the step.
 */
PathSet simulate(const LocalVolFn& vol, double spot, const TermStructure& rate,
                 const TermStructure& dividend, double horizon,
                 std::span<const double> maturities, const McConfig& cfg);

struct McPriceResult {
    double price = 0.0;
    double std_error = 0.0;
};

// Discounted mean put payoff per quote. Throws std::invalid_argument for a
// quote whose maturity was not simulated (e.g. beyond the horizon).
std::vector<McPriceResult> mc_price_puts(const PathSet& paths, std::span<const MarketQuote> quotes,
                                         const TermStructure& rate);

// Nearest grid node in axis-normalized (T, K) coordinates; ties go to the
// lower index, queries outside the hull use the nearest boundary node.
// Invalid cells take the value of their own nearest valid node.
LocalVolFn nn_lookup_vol(const SurfaceGrid& grid);

// Trained network used directly as a local volatility source.
struct NetworkVolSource {
    NetParams params;
    ScalingBox box;
    int spot_nodes = 401;
    double spot_lo = 0.2;  // grid spans [spot_lo * S0, spot_hi * S0], log-spaced
    double spot_hi = 5.0;
    double sigma_min = 0.0;
    double sigma_max = 3.0;
    double guard = kDupireGuard;  // Dupire denominator guard used for validity
};

/**
 * Evaluates the network's Dupire local vol at the start of every MC step on a
 * log-spaced spot grid and interpolates linearly in log S between grid nodes.
 * Nodes where the guard binds or dup < 0 are invalid, as in
 * extract_local_vol; they take the value of the nearest valid node of the
 * same time slice (ties to the lower spot), or of the nearest slice with any
 * valid node. The result is clamped to [sigma_min, sigma_max]. Throws
 * NumericalError if no node is valid.
 */
LocalVolFn network_local_vol(const NetworkVolSource& src, double spot, const TermStructure& rate,
                             const TermStructure& dividend, double horizon, int n_steps);

using VolSource = std::variant<LocalVolFn, SurfaceGrid, NetworkVolSource>;

struct BacktestResult {
    double rmse = 0.0;
    double pooled_std_error = 0.0;  // sqrt(mean s.e.^2)
    std::vector<double> mc_prices;
    std::vector<double> std_errors;

    nlohmann::json to_json() const;
};

BacktestResult backtest_rmse(const VolSource& source, std::span<const MarketQuote> quotes,
                             double spot, const TermStructure& rate, const TermStructure& dividend,
                             const McConfig& cfg);

}  // namespace lvnn
