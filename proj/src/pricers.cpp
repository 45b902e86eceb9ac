#include "lvnn/pricers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "lvnn/errors.hpp"

namespace lvnn {

double LocalVolFn::operator()(double t, double spot) const {
    const double tc = std::clamp(t, 0.0, t_max);
    const double sc = std::clamp(spot, s_min, s_max);
    const double v = surface(tc, sc);
    if (!std::isfinite(v)) {
        throw NumericalError("local volatility is not finite at t=" + std::to_string(t) +
                             ", S=" + std::to_string(spot));
    }
    return std::clamp(v, sigma_min, sigma_max);
}

LocalVolFn flat_local_vol(double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("flat_local_vol: sigma must be >= 0");
    LocalVolFn f;
    f.surface = [sigma](double, double) { return sigma; };
    f.sigma_min = sigma;
    f.sigma_max = sigma;
    return f;
}

LocalVolFn smile_local_vol(double spot, double base, double curvature, double lo, double hi) {
    if (!(spot > 0.0) || !(lo <= hi)) throw std::invalid_argument("smile_local_vol: bad parameters");
    LocalVolFn f;
    f.surface = [=](double t, double s) {
        const double m = std::log(s / spot);
        return base + curvature * m * m * std::exp(-t);
    };
    f.sigma_min = lo;
    f.sigma_max = hi;
    f.s_min = 1e-12;
    return f;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double bs_put(double spot, double strike, double maturity, double rate, double dividend,
              double sigma) {
    if (!(spot > 0.0) || !(strike > 0.0)) throw std::invalid_argument("bs_put: S and K must be > 0");
    if (!(maturity >= 0.0) || !(sigma >= 0.0)) throw std::invalid_argument("bs_put: T and sigma must be >= 0");
    if (maturity == 0.0) return std::max(strike - spot, 0.0);
    const double df = std::exp(-rate * maturity);
    const double dq = std::exp(-dividend * maturity);
    if (sigma == 0.0) return std::max(strike * df - spot * dq, 0.0);
    const double sd = sigma * std::sqrt(maturity);
    const double d1 = (std::log(spot / strike) + (rate - dividend) * maturity) / sd + 0.5 * sd;
    const double d2 = d1 - sd;
    return strike * df * norm_cdf(-d2) - spot * dq * norm_cdf(-d1);
}

double implied_vol(double price, double spot, double strike, double maturity, double rate,
                   double dividend) {
    constexpr double kLo = 1e-4;
    constexpr double kHi = 5.0;
    if (!(maturity > 0.0)) throw NumericalError("implied_vol: maturity must be > 0");
    double lo = kLo, hi = kHi;
    const double p_lo = bs_put(spot, strike, maturity, rate, dividend, lo);
    const double p_hi = bs_put(spot, strike, maturity, rate, dividend, hi);
    const double slack = 1e-12 * std::max(1.0, price);
    if (!std::isfinite(price) || price < p_lo - slack || price > p_hi + slack) {
        throw NumericalError("implied_vol: price " + std::to_string(price) +
                             " outside attainable range [" + std::to_string(p_lo) + ", " +
                             std::to_string(p_hi) + "]");
    }
    if (price <= p_lo) return lo;
    if (price >= p_hi) return hi;

    // Newton on sigma, falling back to bisection whenever the step leaves
    // the current bracket.
    const double sqrt_t = std::sqrt(maturity);
    const double dq = std::exp(-dividend * maturity);
    double sigma = std::clamp(std::sqrt(2.0 * std::abs(std::log(spot / strike) +
                                                       (rate - dividend) * maturity) / maturity),
                              0.05, 1.0);
    for (int iter = 0; iter < 200; ++iter) {
        const double p = bs_put(spot, strike, maturity, rate, dividend, sigma);
        const double diff = p - price;
        if (std::abs(diff) <= 1e-13 * std::max(1.0, price)) return sigma;
        if (diff > 0.0) hi = sigma; else lo = sigma;
        const double sd = sigma * sqrt_t;
        const double d1 = (std::log(spot / strike) + (rate - dividend) * maturity) / sd + 0.5 * sd;
        const double vega = spot * dq * std::exp(-0.5 * d1 * d1) / std::sqrt(2.0 * std::numbers::pi) * sqrt_t;
        double next = vega > 0.0 ? sigma - diff / vega : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo < 1e-15) return next;
        sigma = next;
    }
    return sigma;
}

namespace {

double cell_average_put_payoff(double strike, double spot, double x_center, double dx) {
    // Mean of (K - S0 e^x)^+ over [x - dx/2, x + dx/2].
    const double a = x_center - 0.5 * dx;
    const double b = x_center + 0.5 * dx;
    const double xk = std::log(strike / spot);
    const double m = std::min(b, xk);
    if (m <= a) return 0.0;
    return (strike * (m - a) - spot * (std::exp(m) - std::exp(a))) / dx;
}

double sampled_max_vol(const LocalVolFn& vol, double spot, double maturity) {
    // Coarse sup of sigma over the region the lattice can reach.
    double vmax = 0.0;
    const double span = 6.0 * std::max(vol.sigma_max, 0.05) * std::sqrt(maturity) + 1e-12;
    for (int i = 0; i <= 20; ++i) {
        const double t = maturity * i / 20.0;
        for (int j = -20; j <= 20; ++j) {
            vmax = std::max(vmax, vol(t, spot * std::exp(span * j / 20.0)));
        }
    }
    return vmax;
}

bool try_trinomial(const LocalVolFn& vol, double spot, double strike, double maturity,
                   const TermStructure& rate, const TermStructure& dividend, int n, double vmax,
                   double& price) {
    const double dt = maturity / n;
    const double dx = std::max(vmax, 1e-4) * std::sqrt(3.0 * dt);
    const int width = 2 * n + 1;

    std::vector<double> values(static_cast<std::size_t>(width));
    for (int j = -n; j <= n; ++j) {
        values[static_cast<std::size_t>(j + n)] = cell_average_put_payoff(strike, spot, j * dx, dx);
    }
    std::vector<double> next(values.size());
    for (int i = n - 1; i >= 0; --i) {
        const double t0 = i * dt;
        const double t1 = (i + 1) * dt;
        const double carry = (rate.integrate(t0, t1) - dividend.integrate(t0, t1)) / dt;
        const double disc = std::exp(-rate.integrate(t0, t1));
        for (int j = -i; j <= i; ++j) {
            const double s = spot * std::exp(j * dx);
            const double sig = vol(t0, s);
            const double nu = carry - 0.5 * sig * sig;
            const double var = (sig * sig * dt + nu * nu * dt * dt) / (dx * dx);
            const double drift = nu * dt / dx;
            const double pu = 0.5 * (var + drift);
            const double pd = 0.5 * (var - drift);
            const double pm = 1.0 - var;
            if (pu < -1e-14 || pd < -1e-14 || pm < -1e-14) return false;
            const auto c = static_cast<std::size_t>(j + n);
            next[c] = disc * (pu * values[c + 1] + pm * values[c] + pd * values[c - 1]);
        }
        std::swap(values, next);
    }
    price = values[static_cast<std::size_t>(n)];
    return true;
}

}  // namespace

double trinomial_put(const LocalVolFn& vol, double spot, double strike, double maturity,
                     const TermStructure& rate, const TermStructure& dividend, int n_steps) {
    if (!(spot > 0.0) || !(strike > 0.0)) throw std::invalid_argument("trinomial_put: S and K must be > 0");
    if (!(maturity >= 0.0)) throw std::invalid_argument("trinomial_put: maturity must be >= 0");
    if (n_steps < 1) throw std::invalid_argument("trinomial_put: n_steps must be >= 1");
    if (maturity == 0.0) return std::max(strike - spot, 0.0);

    const double vmax = sampled_max_vol(vol, spot, maturity);
    int n = n_steps;
    for (int attempt = 0; attempt <= 4; ++attempt, n *= 2) {
        double price = 0.0;
        if (try_trinomial(vol, spot, strike, maturity, rate, dividend, n, vmax, price)) return price;
    }
    throw NumericalError("trinomial_put: negative transition probability persists up to " +
                         std::to_string(n / 2) + " steps (T=" + std::to_string(maturity) +
                         ", K=" + std::to_string(strike) + ", sigma_max=" + std::to_string(vmax) + ")");
}

void SyntheticChainSpec::validate() const {
    if (!(spot > 0.0)) throw std::invalid_argument("SyntheticChainSpec: spot must be > 0");
    if (maturities.empty() || strikes.empty()) throw std::invalid_argument("SyntheticChainSpec: empty axes");
    for (std::size_t i = 0; i < maturities.size(); ++i) {
        if (!(maturities[i] > 0.0) || (i > 0 && !(maturities[i] > maturities[i - 1]))) {
            throw std::invalid_argument("SyntheticChainSpec: maturities must be > 0 and increasing");
        }
    }
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        if (!(strikes[i] > 0.0) || (i > 0 && !(strikes[i] > strikes[i - 1]))) {
            throw std::invalid_argument("SyntheticChainSpec: strikes must be > 0 and increasing");
        }
    }
    if (tree_steps < 50) throw std::invalid_argument("SyntheticChainSpec: tree_steps must be >= 50");
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("SyntheticChainSpec: noise_scale must be >= 0");
}

std::vector<MarketQuote> generate_chain(const SyntheticChainSpec& spec) {
    spec.validate();
    std::vector<MarketQuote> quotes;
    quotes.reserve(spec.maturities.size() * spec.strikes.size());
    std::mt19937_64 rng(spec.noise_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double t : spec.maturities) {
        for (double k : spec.strikes) {
            double p = trinomial_put(spec.vol, spec.spot, k, t, spec.rate, spec.dividend, spec.tree_steps);
            if (spec.noise_scale > 0.0) {
                const double cap = k * std::exp(-spec.rate.integrate(0.0, t));
                p = std::clamp(p + spec.noise_scale * noise(rng), 0.0, cap);
            }
            quotes.push_back({t, k, p});
        }
    }
    return quotes;
}

std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("linspace: n must be >= 1");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

}  // namespace lvnn
