#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "lvnn/curves.hpp"

namespace lvnn {

/**
 * Local volatility surface sigma(t, S) with a clamp range.
 *
 * Queries outside [0, t_max] x [s_min, s_max] are evaluated at the nearest
 * point of that domain; results are clamped to [sigma_min, sigma_max].
 */
struct LocalVolFn {
    std::function<double(double t, double spot)> surface;
    double sigma_min = 0.0;
    double sigma_max = 5.0;
    double t_max = std::numeric_limits<double>::infinity();
    double s_min = 0.0;
    double s_max = std::numeric_limits<double>::infinity();

    // Throws NumericalError if the surface returns a non-finite value.
    double operator()(double t, double spot) const;
};

LocalVolFn flat_local_vol(double sigma);

// sigma*(t, S) = clamp(base + curvature * ln^2(S / S0) * e^{-t}, lo, hi).
LocalVolFn smile_local_vol(double spot, double base = 0.2, double curvature = 0.003,
                           double lo = 0.05, double hi = 0.4);

// Standard normal CDF via erfc.
double norm_cdf(double x);

// European put, flat continuously-compounded rate and dividend yield.
double bs_put(double spot, double strike, double maturity, double rate, double dividend,
              double sigma);

// Inverts bs_put on sigma in [1e-4, 5]. Throws NumericalError when the price
// lies outside the attainable range.
double implied_vol(double price, double spot, double strike, double maturity, double rate,
                   double dividend);

/**
 * European put by backward induction on a recombining trinomial lattice in
 * log-spot with node-dependent local volatility. If a transition
 * probability turns negative the step count is doubled (up to four times)
 * before giving up with NumericalError.
 */
double trinomial_put(const LocalVolFn& vol, double spot, double strike, double maturity,
                     const TermStructure& rate, const TermStructure& dividend, int n_steps);

struct SyntheticChainSpec {
    double spot = 100.0;
    std::vector<double> maturities;
    std::vector<double> strikes;
    TermStructure rate = TermStructure::flat(0.0);
    TermStructure dividend = TermStructure::flat(0.0);
    LocalVolFn vol = flat_local_vol(0.2);
    int tree_steps = 200;
    double noise_scale = 0.0;  // std-dev of additive Gaussian price noise
    std::uint64_t noise_seed = 0;

    void validate() const;
};

// One quote per (T, K) pair, maturity-major. Noisy prices are clipped to
// [0, discounted strike].
std::vector<MarketQuote> generate_chain(const SyntheticChainSpec& spec);

// Evenly spaced values lo..hi inclusive.
std::vector<double> linspace(double lo, double hi, int n);

}  // namespace lvnn
