#pragma once

#include <span>
#include <utility>
#include <vector>

namespace lvnn {

/**
 * Deterministic piecewise-constant curve (short rate or dividend yield).
 *
 * values[i] applies on [knot_times[i], knot_times[i+1]); the last value
 * extends to +infinity. The first knot is expected at t = 0; times before
 * the first knot use values[0].
 */
class TermStructure {
public:
    TermStructure(std::vector<double> knot_times, std::vector<double> values);

    static TermStructure flat(double rate);

    double rate_at(double t) const;

    // Exact integral of the curve over [t0, t1]. Throws std::invalid_argument
    // when t1 < t0 or t0 < 0.
    double integrate(double t0, double t1) const;

    const std::vector<double>& knot_times() const { return knot_times_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> knot_times_;
    std::vector<double> values_;
};

double integrate(const TermStructure& ts, double t0, double t1);

// One observed put in raw units.
struct MarketQuote {
    double maturity = 0.0;
    double strike = 0.0;
    double price = 0.0;
};

// Put quote in forward coordinates: F = exp(int q) P, k = K exp(-int (r - q)).
struct ForwardQuote {
    double maturity = 0.0;
    double fwd_strike = 0.0;
    double price = 0.0;
};

// Checks MarketQuote invariants against the rate curve; throws on violation.
void validate(const MarketQuote& q, const TermStructure& rate);

// Multiplier turning a strike K into a forward strike k at maturity T.
double forward_strike_factor(double maturity, const TermStructure& rate,
                             const TermStructure& dividend);

ForwardQuote to_forward(const MarketQuote& q, const TermStructure& rate,
                        const TermStructure& dividend);
MarketQuote from_forward(const ForwardQuote& fq, const TermStructure& rate,
                         const TermStructure& dividend);

std::vector<ForwardQuote> to_forward(std::span<const MarketQuote> quotes,
                                     const TermStructure& rate,
                                     const TermStructure& dividend);

/**
 * Affine chart mapping [t_min, t_max] x [k_min, k_max] onto the unit square.
 * The network only ever sees scaled inputs; points outside the box map
 * outside [0, 1] and are still valid.
 */
struct ScalingBox {
    double t_min = 0.0;
    double t_max = 1.0;
    double k_min = 0.0;
    double k_max = 1.0;

    ScalingBox() = default;
    ScalingBox(double t_lo, double t_hi, double k_lo, double k_hi);

    std::pair<double, double> scale(double maturity, double fwd_strike) const;
    std::pair<double, double> unscale(double t_scaled, double k_scaled) const;
};

// Chain-rule factors: d/dT = c_t d/dT', d2/dk2 = c_k^2 d2/dk'2.
struct ScaleFactors {
    double c_t = 1.0;
    double c_k = 1.0;
};

// Fits the box on the hull of the quotes. Degenerate hull -> invalid_argument.
ScalingBox fit_scaling(std::span<const ForwardQuote> quotes);

// Hull of the quotes widened by the given fractions of each width on both
// sides ("domain of interest" variant).
ScalingBox fit_scaling_padded(std::span<const ForwardQuote> quotes, double t_pad,
                              double k_pad);

ScaleFactors derivative_scale_factors(const ScalingBox& box);

}  // namespace lvnn
