#pragma once

#include <span>
#include <vector>

#include "lvnn/curves.hpp"
#include "lvnn/network.hpp"

namespace lvnn {

// Multipliers for the calendar, butterfly and Dupire-band penalties.
struct PenaltyWeights {
    double calendar = 0.0;
    double butterfly = 0.0;
    double dupire = 0.0;

    void validate() const;
};

// Admissible half-variance interval [low, high] (per annum).
struct HalfVarianceBand {
    double low = 0.05 * 0.05 / 2.0;
    double high = 0.4 * 0.4 / 2.0;

    void validate() const;
};

inline constexpr double kDupireGuard = 1e-8;

struct DupireValue {
    double dup = 0.0;
    bool guard_bound = false;  // denominator fell to the guard
};

/**
 * Half-variance sigma^2/2 = dF/dT / (k^2 d2F/dk2) in raw forward units.
 *
 * `eval` carries scaled-input sensitivities; the chain-rule factors convert
 * them. The denominator is floored at `guard`.
 */
DupireValue dupire_half_variance(const EvalResult& eval, double fwd_strike, ScaleFactors factors,
                                 double guard = kDupireGuard);

struct PenaltyVector {
    double calendar = 0.0;   // (dF/dT)^-
    double butterfly = 0.0;  // (d2F/dk2)^-
    double dupire = 0.0;     // (dup - high)^+ + (dup - low)^-
};

PenaltyVector penalty_vector(const EvalResult& eval, double fwd_strike, ScaleFactors factors,
                             const HalfVarianceBand& band, double guard = kDupireGuard);

// One site of the objective. Fit sites carry a target price; penalty-only
// sites (auxiliary grid) do not contribute to the L1 term.
struct TrainingPoint {
    double t_scaled = 0.0;
    double k_scaled = 0.0;
    double fwd_strike = 1.0;  // raw k
    double target = 0.0;      // F*
    bool dupire_active = true;  // false on T = 0 payoff rows
};

struct LossBreakdown {
    double fit_l1 = 0.0;
    double pen_calendar = 0.0;
    double pen_butterfly = 0.0;
    double pen_dupire = 0.0;
    double total = 0.0;
    int guard_hits = 0;
};

struct ObjectiveConfig {
    PenaltyWeights lambda;
    HalfVarianceBand band;
    ScaleFactors factors;
    double guard = kDupireGuard;
    // Extra penalty-only sites, averaged separately from the fit sites.
    std::vector<TrainingPoint> aux_sites;
    // Worker threads for gradient evaluation. Points are reduced in fixed
    // blocks, so results do not depend on the thread count.
    int threads = 1;
    int block_size = 128;
};

// Builds fit sites from forward quotes in the given chart. Rows with T = 0
// have the Dupire penalty disabled.
std::vector<TrainingPoint> make_training_points(std::span<const ForwardQuote> quotes,
                                                const ScalingBox& box);

// Uniform n x n penalty-only grid over the unit square.
std::vector<TrainingPoint> make_aux_grid(int n, const ScalingBox& box);

// Mean over points of |F* - F| + lambda . phi. Throws on empty input.
LossBreakdown loss(const NetParams& params, std::span<const TrainingPoint> points,
                   const ObjectiveConfig& cfg);

struct LossAndGradient {
    LossBreakdown loss;
    NetParams gradient;
};

// Exact gradient of loss().total. Kinks of |.|, (.)^+ and (.)^- take slope 0.
LossAndGradient loss_and_gradient(const NetParams& params, std::span<const TrainingPoint> points,
                                  const ObjectiveConfig& cfg);

NetParams loss_gradient(const NetParams& params, std::span<const TrainingPoint> points,
                        const ObjectiveConfig& cfg);

}  // namespace lvnn
