#include "lvnn/audit.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "lvnn/csv_io.hpp"
#include "lvnn/errors.hpp"
#include "lvnn/pricers.hpp"

namespace lvnn {

nlohmann::json ViolationReport::to_json() const {
    return {{"n_calendar", n_calendar},
            {"n_butterfly", n_butterfly},
            {"n_points", n_points},
            {"n_violating", n_violating},
            {"fraction", fraction}};
}

ViolationReport count_violations(const NetParams& params, std::span<const double> maturities,
                                 std::span<const double> fwd_strikes, const ScalingBox& box,
                                 double tol) {
    if (maturities.size() != fwd_strikes.size()) {
        throw std::invalid_argument("count_violations: coordinate arrays differ in length");
    }
    const std::size_t n = maturities.size();
    std::vector<double> ts(n), ks(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::tie(ts[i], ks[i]) = box.scale(maturities[i], fwd_strikes[i]);
    }
    const ScaleFactors f = derivative_scale_factors(box);
    const BatchEval ev = forward_with_sensitivities(params, ts, ks);

    ViolationReport rep;
    rep.n_points = static_cast<int>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const bool calendar = f.c_t * ev.dT[idx] < -tol;
        const bool butterfly = f.c_k * f.c_k * ev.dkk[idx] < -tol;
        rep.n_calendar += calendar;
        rep.n_butterfly += butterfly;
        if (calendar || butterfly) {
            ++rep.n_violating;
            rep.locations.emplace_back(maturities[i], fwd_strikes[i]);
        }
    }
    rep.fraction = n == 0 ? 0.0 : static_cast<double>(rep.n_violating) / static_cast<double>(n);
    return rep;
}

double rmse(std::span<const double> predicted, std::span<const double> reference) {
    if (predicted.size() != reference.size()) throw std::invalid_argument("rmse: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - reference[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predicted.size()));
}

ImpliedVolRmse implied_vol_rmse(std::span<const double> predicted,
                                std::span<const MarketQuote> reference, double spot,
                                const TermStructure& rate, const TermStructure& dividend) {
    if (predicted.size() != reference.size()) throw std::invalid_argument("implied_vol_rmse: length mismatch");
    ImpliedVolRmse out;
    double acc = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const MarketQuote& q = reference[i];
        if (!(q.maturity > 0.0)) continue;
        const double r = rate.integrate(0.0, q.maturity) / q.maturity;
        const double d = dividend.integrate(0.0, q.maturity) / q.maturity;
        try {
            const double a = implied_vol(predicted[i], spot, q.strike, q.maturity, r, d);
            const double b = implied_vol(q.price, spot, q.strike, q.maturity, r, d);
            acc += (a - b) * (a - b);
            ++out.n_used;
        } catch (const NumericalError&) {
            ++out.n_failed;
        }
    }
    out.rmse = out.n_used > 0 ? std::sqrt(acc / out.n_used) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

void SurfaceGrid::validate() const {
    auto strictly_increasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] > v[i - 1])) return false;
        return !v.empty();
    };
    if (!strictly_increasing(maturities) || !strictly_increasing(strikes)) {
        throw std::invalid_argument("SurfaceGrid: axes must be non-empty and strictly increasing");
    }
    const auto nt = static_cast<Eigen::Index>(maturities.size());
    const auto nk = static_cast<Eigen::Index>(strikes.size());
    if (values.rows() != nt || values.cols() != nk || flags.rows() != nt || flags.cols() != nk) {
        throw std::invalid_argument("SurfaceGrid: matrix dimensions do not match axes");
    }
}

int SurfaceGrid::invalid_count() const { return static_cast<int>((flags.array() != kCellValid).count()); }

namespace {

struct GridEval {
    std::vector<double> fwd_strikes;
    BatchEval eval;
};

GridEval evaluate_grid(const NetParams& params, const std::vector<double>& maturities,
                       const std::vector<double>& strikes, const ScalingBox& box,
                       const TermStructure& rate, const TermStructure& dividend) {
    const std::size_t n = maturities.size() * strikes.size();
    std::vector<double> ts, ks;
    GridEval g;
    ts.reserve(n);
    ks.reserve(n);
    g.fwd_strikes.reserve(n);
    for (double t : maturities) {
        const double factor = forward_strike_factor(t, rate, dividend);
        for (double strike : strikes) {
            const double k = strike * factor;
            const auto [a, b] = box.scale(t, k);
            ts.push_back(a);
            ks.push_back(b);
            g.fwd_strikes.push_back(k);
        }
    }
    g.eval = forward_with_sensitivities(params, ts, ks);
    return g;
}

SurfaceGrid empty_grid(std::vector<double> maturities, std::vector<double> strikes) {
    SurfaceGrid grid;
    grid.maturities = std::move(maturities);
    grid.strikes = std::move(strikes);
    const auto nt = static_cast<Eigen::Index>(grid.maturities.size());
    const auto nk = static_cast<Eigen::Index>(grid.strikes.size());
    grid.values = Eigen::MatrixXd::Zero(nt, nk);
    grid.flags = Eigen::MatrixXi::Zero(nt, nk);
    grid.validate();
    return grid;
}

}  // namespace

std::vector<double> predict_prices(const NetParams& params, std::span<const MarketQuote> quotes,
                                   const ScalingBox& box, const TermStructure& rate,
                                   const TermStructure& dividend) {
    std::vector<double> ts, ks;
    ts.reserve(quotes.size());
    ks.reserve(quotes.size());
    for (const auto& q : quotes) {
        const auto [a, b] = box.scale(q.maturity, q.strike * forward_strike_factor(q.maturity, rate, dividend));
        ts.push_back(a);
        ks.push_back(b);
    }
    const Eigen::VectorXd f = forward(params, ts, ks);
    std::vector<double> out(quotes.size());
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        out[i] = f[static_cast<Eigen::Index>(i)] * std::exp(-dividend.integrate(0.0, quotes[i].maturity));
    }
    return out;
}

SurfaceGrid price_surface(const NetParams& params, std::vector<double> maturities,
                          std::vector<double> strikes, const ScalingBox& box,
                          const TermStructure& rate, const TermStructure& dividend) {
    SurfaceGrid grid = empty_grid(std::move(maturities), std::move(strikes));
    const GridEval g = evaluate_grid(params, grid.maturities, grid.strikes, box, rate, dividend);
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
        const double shrink = std::exp(-dividend.integrate(0.0, grid.maturities[static_cast<std::size_t>(i)]));
        for (Eigen::Index j = 0; j < grid.values.cols(); ++j, ++idx) {
            grid.values(i, j) = g.eval.value[idx] * shrink;
        }
    }
    return grid;
}

SurfaceGrid extract_local_vol(const NetParams& params, std::vector<double> maturities,
                              std::vector<double> strikes, const ScalingBox& box,
                              const TermStructure& rate, const TermStructure& dividend,
                              double guard) {
    SurfaceGrid grid = empty_grid(std::move(maturities), std::move(strikes));
    const GridEval g = evaluate_grid(params, grid.maturities, grid.strikes, box, rate, dividend);
    const ScaleFactors f = derivative_scale_factors(box);
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < grid.values.cols(); ++j, ++idx) {
            const DupireValue d = dupire_half_variance(g.eval.at(idx),
                                                       g.fwd_strikes[static_cast<std::size_t>(idx)], f, guard);
            if (d.guard_bound) {
                grid.flags(i, j) = kCellGuardBound;
                grid.values(i, j) = std::numeric_limits<double>::quiet_NaN();
            } else if (d.dup < 0.0) {
                grid.flags(i, j) = kCellNegative;
                grid.values(i, j) = std::numeric_limits<double>::quiet_NaN();
            } else {
                grid.values(i, j) = std::sqrt(2.0 * d.dup);
            }
        }
    }
    return grid;
}

double sparsity_bound(double eps, double alpha, double input_dim, double sigma0) {
    if (!(eps > 0.0) || !(eps < 1.0)) throw std::domain_error("sparsity_bound: eps must lie in (0, 1)");
    if (!(alpha > 0.0) || !(input_dim > 0.0) || !(sigma0 > 0.0)) {
        throw std::domain_error("sparsity_bound: alpha, i and Sigma0 must be > 0");
    }
    return sigma0 * std::pow(eps, -input_dim / alpha) * std::log(1.0 / eps);
}

void write_surface_csv(const std::filesystem::path& path, const SurfaceGrid& grid) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < grid.maturities.size(); ++i) {
        for (std::size_t j = 0; j < grid.strikes.size(); ++j) {
            const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(j);
            rows.push_back({grid.maturities[i], grid.strikes[j], grid.values(r, c),
                            static_cast<double>(grid.flags(r, c))});
        }
    }
    io::write_table(path, {"T", "K", "value", "flag"}, rows);
}

void write_violations_csv(const std::filesystem::path& path, const ViolationReport& report) {
    std::vector<std::vector<double>> rows;
    for (const auto& [t, k] : report.locations) rows.push_back({t, k});
    io::write_table(path, {"T", "k"}, rows);
}

}  // namespace lvnn
