#include "lvnn/curves.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lvnn {

TermStructure::TermStructure(std::vector<double> knot_times, std::vector<double> values)
    : knot_times_(std::move(knot_times)), values_(std::move(values)) {
    if (values_.empty()) {
        throw std::invalid_argument("TermStructure: at least one value required");
    }
    if (knot_times_.size() != values_.size()) {
        throw std::invalid_argument("TermStructure: knot_times and values differ in length");
    }
    for (std::size_t i = 0; i < knot_times_.size(); ++i) {
        if (!std::isfinite(knot_times_[i]) || knot_times_[i] < 0.0) {
            throw std::invalid_argument("TermStructure: knot times must be finite and >= 0");
        }
        if (!std::isfinite(values_[i])) {
            throw std::invalid_argument("TermStructure: non-finite rate");
        }
        if (i > 0 && knot_times_[i] <= knot_times_[i - 1]) {
            throw std::invalid_argument("TermStructure: knot times must be strictly increasing");
        }
    }
}

TermStructure TermStructure::flat(double rate) { return TermStructure({0.0}, {rate}); }

double TermStructure::rate_at(double t) const {
    auto it = std::upper_bound(knot_times_.begin(), knot_times_.end(), t);
    if (it == knot_times_.begin()) return values_.front();
    return values_[static_cast<std::size_t>(it - knot_times_.begin()) - 1];
}

double TermStructure::integrate(double t0, double t1) const {
    if (!(t0 >= 0.0)) throw std::invalid_argument("integrate: t0 must be >= 0");
    if (t1 < t0) throw std::invalid_argument("integrate: invalid interval, t1 < t0");
    if (t1 == t0) return 0.0;

    // Sum rectangles piece by piece; piece i covers [knot_i, knot_{i+1}).
    double total = 0.0;
    double cursor = t0;
    const std::size_t n = knot_times_.size();
    for (std::size_t i = 0; i < n && cursor < t1; ++i) {
        const double right = (i + 1 < n) ? knot_times_[i + 1] : t1;
        if (right <= cursor) continue;
        const double end = std::min(right, t1);
        total += values_[i] * (end - cursor);
        cursor = end;
    }
    return total;
}

double integrate(const TermStructure& ts, double t0, double t1) { return ts.integrate(t0, t1); }

void validate(const MarketQuote& q, const TermStructure& rate) {
    if (!std::isfinite(q.maturity) || q.maturity < 0.0) {
        throw std::invalid_argument("MarketQuote: maturity must be >= 0");
    }
    if (!std::isfinite(q.strike) || q.strike <= 0.0) {
        throw std::invalid_argument("MarketQuote: strike must be > 0");
    }
    if (!std::isfinite(q.price) || q.price < 0.0) {
        throw std::invalid_argument("MarketQuote: price must be >= 0");
    }
    const double discounted = q.strike * std::exp(-rate.integrate(0.0, q.maturity));
    if (q.price > discounted * (1.0 + 1e-12)) {
        throw std::invalid_argument("MarketQuote: put price exceeds discounted strike (T=" +
                                    std::to_string(q.maturity) +
                                    ", K=" + std::to_string(q.strike) + ")");
    }
}

double forward_strike_factor(double maturity, const TermStructure& rate,
                             const TermStructure& dividend) {
    return std::exp(-(rate.integrate(0.0, maturity) - dividend.integrate(0.0, maturity)));
}

ForwardQuote to_forward(const MarketQuote& q, const TermStructure& rate,
                        const TermStructure& dividend) {
    validate(q, rate);
    const double growth = std::exp(dividend.integrate(0.0, q.maturity));
    return {q.maturity, q.strike * forward_strike_factor(q.maturity, rate, dividend),
            q.price * growth};
}

MarketQuote from_forward(const ForwardQuote& fq, const TermStructure& rate,
                         const TermStructure& dividend) {
    if (!(fq.fwd_strike > 0.0) || !(fq.price >= 0.0) || !(fq.maturity >= 0.0)) {
        throw std::invalid_argument("ForwardQuote: requires k > 0, F >= 0, T >= 0");
    }
    const double growth = std::exp(dividend.integrate(0.0, fq.maturity));
    return {fq.maturity, fq.fwd_strike / forward_strike_factor(fq.maturity, rate, dividend),
            fq.price / growth};
}

std::vector<ForwardQuote> to_forward(std::span<const MarketQuote> quotes,
                                     const TermStructure& rate,
                                     const TermStructure& dividend) {
    std::vector<ForwardQuote> out;
    out.reserve(quotes.size());
    for (const auto& q : quotes) out.push_back(to_forward(q, rate, dividend));
    return out;
}

ScalingBox::ScalingBox(double t_lo, double t_hi, double k_lo, double k_hi)
    : t_min(t_lo), t_max(t_hi), k_min(k_lo), k_max(k_hi) {
    if (!(t_max > t_min) || !(k_max > k_min) || !std::isfinite(t_max - t_min) ||
        !std::isfinite(k_max - k_min)) {
        throw std::invalid_argument("ScalingBox: degenerate box (max must exceed min)");
    }
}

std::pair<double, double> ScalingBox::scale(double maturity, double fwd_strike) const {
    return {(maturity - t_min) / (t_max - t_min), (fwd_strike - k_min) / (k_max - k_min)};
}

std::pair<double, double> ScalingBox::unscale(double t_scaled, double k_scaled) const {
    return {t_min + t_scaled * (t_max - t_min), k_min + k_scaled * (k_max - k_min)};
}

namespace {

ScalingBox hull(std::span<const ForwardQuote> quotes, double t_pad, double k_pad) {
    if (quotes.size() < 2) {
        throw std::invalid_argument("fit_scaling: need at least two quotes");
    }
    auto [t_lo, t_hi] = std::minmax_element(quotes.begin(), quotes.end(),
        [](const ForwardQuote& a, const ForwardQuote& b) { return a.maturity < b.maturity; });
    auto [k_lo, k_hi] = std::minmax_element(quotes.begin(), quotes.end(),
        [](const ForwardQuote& a, const ForwardQuote& b) { return a.fwd_strike < b.fwd_strike; });
    const double tw = t_hi->maturity - t_lo->maturity;
    const double kw = k_hi->fwd_strike - k_lo->fwd_strike;
    if (!(tw > 0.0) || !(kw > 0.0)) {
        throw std::invalid_argument("fit_scaling: degenerate box, need distinct maturities and strikes");
    }
    return ScalingBox(t_lo->maturity - t_pad * tw, t_hi->maturity + t_pad * tw,
                      k_lo->fwd_strike - k_pad * kw, k_hi->fwd_strike + k_pad * kw);
}

}  // namespace

ScalingBox fit_scaling(std::span<const ForwardQuote> quotes) { return hull(quotes, 0.0, 0.0); }

ScalingBox fit_scaling_padded(std::span<const ForwardQuote> quotes, double t_pad, double k_pad) {
    if (t_pad < 0.0 || k_pad < 0.0) throw std::invalid_argument("fit_scaling_padded: negative padding");
    return hull(quotes, t_pad, k_pad);
}

ScaleFactors derivative_scale_factors(const ScalingBox& box) {
    return {1.0 / (box.t_max - box.t_min), 1.0 / (box.k_max - box.k_min)};
}

}  // namespace lvnn
