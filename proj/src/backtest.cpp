#include "lvnn/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

#include "lvnn/errors.hpp"
#include "lvnn/objective.hpp"

namespace lvnn {

void McConfig::validate() const {
    if (n_paths < 1) throw std::invalid_argument("McConfig: n_paths must be >= 1");
    if (n_steps < 1) throw std::invalid_argument("McConfig: n_steps must be >= 1");
    if (antithetic && n_paths % 2 != 0) {
        throw std::invalid_argument("McConfig: antithetic sampling needs an even n_paths");
    }
}

nlohmann::json McConfig::to_json() const {
    return {{"n_paths", n_paths}, {"n_steps", n_steps}, {"seed", seed},
            {"antithetic", antithetic}, {"scheme", "log-euler"}};
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Pairwise summation keeps the reduction order fixed and the error O(log n).
double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

}  // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t path)
    : key_(mix64(mix64(seed + kGolden) ^ (path * kGolden + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t PathRng::next_u64() { return mix64(key_ + (++counter_) * kGolden); }

double PathRng::next_normal() {
    // Box-Muller, one variate per call so every draw index is independent
    // of how many were consumed before.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;          // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PathSet simulate(const LocalVolFn& vol, double spot, const TermStructure& rate,
                 const TermStructure& dividend, double horizon,
                 std::span<const double> maturities, const McConfig& cfg) {
    cfg.validate();
    if (!(spot > 0.0)) throw std::invalid_argument("simulate: spot must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate: horizon must be > 0");
    PathSet ps;
    ps.maturities.assign(maturities.begin(), maturities.end());
    ps.dt = horizon / cfg.n_steps;
    ps.antithetic = cfg.antithetic;
    for (double t : maturities) {
        if (!(t >= 0.0) || t > horizon * (1.0 + 1e-12)) {
            throw std::invalid_argument("simulate: maturity " + std::to_string(t) + " outside [0, horizon]");
        }
        ps.step_index.push_back(static_cast<int>(std::lround(t / ps.dt)));
    }

    std::vector<double> drift(static_cast<std::size_t>(cfg.n_steps));
    for (int i = 0; i < cfg.n_steps; ++i) {
        const double t0 = i * ps.dt, t1 = (i + 1) * ps.dt;
        drift[static_cast<std::size_t>(i)] = rate.integrate(t0, t1) - dividend.integrate(t0, t1);
    }
    // For each step, which output columns record the state after it.
    std::vector<std::vector<Eigen::Index>> record(static_cast<std::size_t>(cfg.n_steps) + 1);
    for (std::size_t m = 0; m < ps.step_index.size(); ++m) {
        record[static_cast<std::size_t>(ps.step_index[m])].push_back(static_cast<Eigen::Index>(m));
    }

    const double sqrt_dt = std::sqrt(ps.dt);
    ps.terminal.resize(cfg.n_paths, static_cast<Eigen::Index>(maturities.size()));
    for (long p = 0; p < cfg.n_paths; ++p) {
        const std::uint64_t stream = cfg.antithetic ? static_cast<std::uint64_t>(p / 2) : static_cast<std::uint64_t>(p);
        const double sign = (cfg.antithetic && (p % 2 == 1)) ? -1.0 : 1.0;
        PathRng rng(cfg.seed, stream);
        double log_s = std::log(spot);
        double s = spot;
        for (Eigen::Index c : record[0]) ps.terminal(p, c) = s;
        for (int i = 0; i < cfg.n_steps; ++i) {
            const double sig = vol(i * ps.dt, s);
            const double z = sign * rng.next_normal();
            log_s += drift[static_cast<std::size_t>(i)] - 0.5 * sig * sig * ps.dt + sig * sqrt_dt * z;
            s = std::exp(log_s);
            for (Eigen::Index c : record[static_cast<std::size_t>(i) + 1]) ps.terminal(p, c) = s;
        }
    }
    return ps;
}

std::vector<McPriceResult> mc_price_puts(const PathSet& paths, std::span<const MarketQuote> quotes,
                                         const TermStructure& rate) {
    const long n = paths.terminal.rows();
    if (n < 1) throw std::invalid_argument("mc_price_puts: no paths");
    std::vector<McPriceResult> out;
    out.reserve(quotes.size());
    std::vector<double> samples;
    for (const auto& q : quotes) {
        Eigen::Index col = -1;
        for (std::size_t m = 0; m < paths.maturities.size(); ++m) {
            if (std::abs(paths.maturities[m] - q.maturity) <= 1e-12 * std::max(1.0, q.maturity)) {
                col = static_cast<Eigen::Index>(m);
                break;
            }
        }
        if (col < 0) {
            throw std::invalid_argument("mc_price_puts: maturity " + std::to_string(q.maturity) +
                                        " was not simulated (beyond horizon or not requested)");
        }
        const double disc = std::exp(-rate.integrate(0.0, q.maturity));
        if (paths.antithetic) {
            samples.resize(static_cast<std::size_t>(n / 2));
            for (long m = 0; m < n / 2; ++m) {
                const double a = std::max(q.strike - paths.terminal(2 * m, col), 0.0);
                const double b = std::max(q.strike - paths.terminal(2 * m + 1, col), 0.0);
                samples[static_cast<std::size_t>(m)] = 0.5 * disc * (a + b);
            }
        } else {
            samples.resize(static_cast<std::size_t>(n));
            for (long p = 0; p < n; ++p) {
                samples[static_cast<std::size_t>(p)] = disc * std::max(q.strike - paths.terminal(p, col), 0.0);
            }
        }
        const std::size_t m = samples.size();
        const double mean = pairwise_sum(samples.data(), m) / static_cast<double>(m);
        for (double& x : samples) x = (x - mean) * (x - mean);
        const double var = m > 1 ? pairwise_sum(samples.data(), m) / static_cast<double>(m - 1) : 0.0;
        out.push_back({mean, std::sqrt(var / static_cast<double>(m))});
    }
    return out;
}

namespace {

std::size_t nearest_index(const std::vector<double>& axis, double x) {
    auto it = std::lower_bound(axis.begin(), axis.end(), x);
    if (it == axis.begin()) return 0;
    if (it == axis.end()) return axis.size() - 1;
    const auto hi = static_cast<std::size_t>(it - axis.begin());
    const std::size_t lo = hi - 1;
    return (x - axis[lo] <= axis[hi] - x) ? lo : hi;
}

}  // namespace

LocalVolFn nn_lookup_vol(const SurfaceGrid& grid) {
    grid.validate();
    const std::size_t nt = grid.maturities.size();
    const std::size_t nk = grid.strikes.size();
    const double t_width = grid.maturities.back() - grid.maturities.front();
    const double k_width = grid.strikes.back() - grid.strikes.front();
    auto norm_t = [&](double t) { return t_width > 0.0 ? (t - grid.maturities.front()) / t_width : 0.0; };
    auto norm_k = [&](double k) { return k_width > 0.0 ? (k - grid.strikes.front()) / k_width : 0.0; };

    auto table = std::make_shared<std::vector<double>>(nt * nk);
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < nk; ++j)
            if (grid.flags(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == kCellValid &&
                std::isfinite(grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))))
                valid.push_back(i * nk + j);
    if (valid.empty()) throw std::invalid_argument("nn_lookup_vol: grid has no valid cells");

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < nk; ++j) {
            std::size_t src = i * nk + j;
            if (!std::binary_search(valid.begin(), valid.end(), src)) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t v : valid) {
                    const double dt = norm_t(grid.maturities[v / nk]) - norm_t(grid.maturities[i]);
                    const double dk = norm_k(grid.strikes[v % nk]) - norm_k(grid.strikes[j]);
                    const double d = dt * dt + dk * dk;
                    if (d < best) {
                        best = d;
                        src = v;
                    }
                }
            }
            const double v = grid.values(static_cast<Eigen::Index>(src / nk), static_cast<Eigen::Index>(src % nk));
            (*table)[i * nk + j] = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    LocalVolFn f;
    f.surface = [table, t_axis = grid.maturities, k_axis = grid.strikes, nk](double t, double s) {
        // Nearest node in normalized Euclidean distance factorizes per axis
        // on a rectilinear grid.
        return (*table)[nearest_index(t_axis, t) * nk + nearest_index(k_axis, s)];
    };
    f.sigma_min = lo;
    f.sigma_max = hi;
    return f;
}

LocalVolFn network_local_vol(const NetworkVolSource& src, double spot, const TermStructure& rate,
                             const TermStructure& dividend, double horizon, int n_steps) {
    if (n_steps < 1 || !(horizon > 0.0)) throw std::invalid_argument("network_local_vol: bad time grid");
    if (src.spot_nodes < 2 || !(src.spot_lo > 0.0) || !(src.spot_hi > src.spot_lo)) {
        throw std::invalid_argument("network_local_vol: bad spot grid");
    }
    const double dt = horizon / n_steps;
    const int ns = src.spot_nodes;
    const double log_lo = std::log(src.spot_lo * spot);
    const double log_hi = std::log(src.spot_hi * spot);
    const double h = (log_hi - log_lo) / (ns - 1);

    std::vector<double> ts, ks, fwd;
    ts.reserve(static_cast<std::size_t>((n_steps + 1) * ns));
    for (int i = 0; i <= n_steps; ++i) {
        const double t = i * dt;
        const double factor = forward_strike_factor(t, rate, dividend);
        for (int j = 0; j < ns; ++j) {
            const double k = std::exp(log_lo + j * h) * factor;
            const auto [a, b] = src.box.scale(t, k);
            ts.push_back(a);
            ks.push_back(b);
            fwd.push_back(k);
        }
    }
    const BatchEval ev = forward_with_sensitivities(src.params, ts, ks);
    const ScaleFactors f = derivative_scale_factors(src.box);
    const auto rows = static_cast<std::size_t>(n_steps + 1);
    const auto cols = static_cast<std::size_t>(ns);
    auto table = std::make_shared<std::vector<double>>(ts.size());
    std::vector<char> ok(ts.size(), 0);
    std::vector<char> row_ok(rows, 0);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const DupireValue d = dupire_half_variance(ev.at(static_cast<Eigen::Index>(i)), fwd[i], f, src.guard);
        if (!d.guard_bound && d.dup >= 0.0 && std::isfinite(d.dup)) {
            (*table)[i] = std::clamp(std::sqrt(2.0 * d.dup), src.sigma_min, src.sigma_max);
            ok[i] = 1;
            row_ok[i / cols] = 1;
        }
    }
    if (std::find(row_ok.begin(), row_ok.end(), 1) == row_ok.end()) {
        throw NumericalError("network_local_vol: no valid local-vol node");
    }
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t rs = r;
        for (std::size_t d = 1; !row_ok[rs]; ++d) {
            if (r >= d && row_ok[r - d]) rs = r - d;
            else if (r + d < rows && row_ok[r + d]) rs = r + d;
        }
        for (std::size_t j = 0; j < cols; ++j) {
            if (rs == r && ok[r * cols + j]) continue;
            std::size_t best = cols;
            for (std::size_t d = 0; best == cols; ++d) {
                if (j >= d && ok[rs * cols + j - d]) best = j - d;
                else if (j + d < cols && ok[rs * cols + j + d]) best = j + d;
            }
            (*table)[r * cols + j] = (*table)[rs * cols + best];
        }
    }

    LocalVolFn out;
    out.surface = [table, dt, n_steps, ns, log_lo, h](double t, double s) {
        const int i = std::clamp(static_cast<int>(std::floor(t / dt + 1e-9)), 0, n_steps);
        const double u = std::clamp((std::log(s) - log_lo) / h, 0.0, static_cast<double>(ns - 1));
        const int j = std::min(static_cast<int>(u), ns - 2);
        const double w = u - j;
        const double* row = table->data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(ns);
        return (1.0 - w) * row[j] + w * row[j + 1];
    };
    out.sigma_min = src.sigma_min;
    out.sigma_max = src.sigma_max;
    out.s_min = 1e-300;
    return out;
}

nlohmann::json BacktestResult::to_json() const {
    return {{"rmse", rmse}, {"pooled_std_error", pooled_std_error}, {"n_quotes", mc_prices.size()}};
}

BacktestResult backtest_rmse(const VolSource& source, std::span<const MarketQuote> quotes,
                             double spot, const TermStructure& rate, const TermStructure& dividend,
                             const McConfig& cfg) {
    if (quotes.empty()) throw std::invalid_argument("backtest_rmse: no quotes");
    std::set<double> mats;
    for (const auto& q : quotes) mats.insert(q.maturity);
    const std::vector<double> maturities(mats.begin(), mats.end());
    const double horizon = maturities.back();
    if (!(horizon > 0.0)) throw std::invalid_argument("backtest_rmse: all quotes have T = 0");

    const LocalVolFn vol = std::visit(
        [&](const auto& s) -> LocalVolFn {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, LocalVolFn>) return s;
            else if constexpr (std::is_same_v<S, SurfaceGrid>) return nn_lookup_vol(s);
            else return network_local_vol(s, spot, rate, dividend, horizon, cfg.n_steps);
        },
        source);

    const PathSet paths = simulate(vol, spot, rate, dividend, horizon, maturities, cfg);
    const std::vector<McPriceResult> priced = mc_price_puts(paths, quotes, rate);

    BacktestResult res;
    std::vector<double> ref;
    double se2 = 0.0;
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        res.mc_prices.push_back(priced[i].price);
        res.std_errors.push_back(priced[i].std_error);
        ref.push_back(quotes[i].price);
        se2 += priced[i].std_error * priced[i].std_error;
    }
    res.rmse = rmse(res.mc_prices, ref);
    res.pooled_std_error = std::sqrt(se2 / static_cast<double>(quotes.size()));
    return res;
}

}  // namespace lvnn
