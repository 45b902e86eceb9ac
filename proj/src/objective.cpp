#include "lvnn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace lvnn {

void PenaltyWeights::validate() const {
    if (!(calendar >= 0.0) || !(butterfly >= 0.0) || !(dupire >= 0.0)) {
        throw std::invalid_argument("PenaltyWeights: multipliers must be >= 0");
    }
}

void HalfVarianceBand::validate() const {
    if (!(low > 0.0) || !(high > low)) {
        throw std::invalid_argument("HalfVarianceBand: require 0 < low < high");
    }
}

DupireValue dupire_half_variance(const EvalResult& eval, double fwd_strike, ScaleFactors factors,
                                 double guard) {
    const double numer = factors.c_t * eval.dT;
    const double denom = fwd_strike * fwd_strike * factors.c_k * factors.c_k * eval.dkk;
    if (denom > guard) return {numer / denom, false};
    return {numer / guard, true};
}

PenaltyVector penalty_vector(const EvalResult& eval, double fwd_strike, ScaleFactors factors,
                             const HalfVarianceBand& band, double guard) {
    PenaltyVector phi;
    phi.calendar = std::max(-factors.c_t * eval.dT, 0.0);
    phi.butterfly = std::max(-factors.c_k * factors.c_k * eval.dkk, 0.0);
    const double dup = dupire_half_variance(eval, fwd_strike, factors, guard).dup;
    phi.dupire = std::max(dup - band.high, 0.0) + std::max(band.low - dup, 0.0);
    return phi;
}

std::vector<TrainingPoint> make_training_points(std::span<const ForwardQuote> quotes,
                                                const ScalingBox& box) {
    std::vector<TrainingPoint> pts;
    pts.reserve(quotes.size());
    for (const auto& q : quotes) {
        const auto [ts, ks] = box.scale(q.maturity, q.fwd_strike);
        pts.push_back({ts, ks, q.fwd_strike, q.price, q.maturity > 0.0});
    }
    return pts;
}

std::vector<TrainingPoint> make_aux_grid(int n, const ScalingBox& box) {
    if (n < 2) throw std::invalid_argument("make_aux_grid: need n >= 2");
    std::vector<TrainingPoint> pts;
    pts.reserve(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double ts = static_cast<double>(i) / (n - 1);
            const double ks = static_cast<double>(j) / (n - 1);
            const auto [t, k] = box.unscale(ts, ks);
            if (k <= 0.0) continue;
            pts.push_back({ts, ks, k, 0.0, t > 0.0});
        }
    }
    return pts;
}

namespace {

struct BlockResult {
    LossBreakdown loss;  // unweighted sums within the block
    NetParams gradient;
    bool has_gradient = false;
};

// Sums of the per-site terms over one block; the gradient is of
// `weight` * sum(terms), with weight = 1/n of the owning site set.
BlockResult evaluate_block(const NetParams& params, std::span<const TrainingPoint> block,
                           bool with_fit, double weight, const ObjectiveConfig& cfg,
                           bool want_gradient) {
    const std::size_t n = block.size();
    std::vector<double> ts(n), ks(n);
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = block[i].t_scaled;
        ks[i] = block[i].k_scaled;
    }
    const BatchEval ev = forward_with_sensitivities(params, ts, ks);
    const ScaleFactors f = cfg.factors;
    const double ck2 = f.c_k * f.c_k;
    const PenaltyWeights& lam = cfg.lambda;

    BlockResult out;
    std::vector<double> adj_v(n, 0.0), adj_t(n, 0.0), adj_s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const double value = ev.value[idx];
        const double dT = ev.dT[idx];
        const double dkk = ev.dkk[idx];
        const TrainingPoint& pt = block[i];

        if (with_fit) {
            const double resid = pt.target - value;
            out.loss.fit_l1 += std::abs(resid);
            if (resid > 0.0) adj_v[i] = -weight;
            else if (resid < 0.0) adj_v[i] = weight;
        }

        const double cal = -f.c_t * dT;
        if (cal > 0.0) {
            out.loss.pen_calendar += cal;
            adj_t[i] += weight * lam.calendar * -f.c_t;
        }
        const double fly = -ck2 * dkk;
        if (fly > 0.0) {
            out.loss.pen_butterfly += fly;
            adj_s[i] += weight * lam.butterfly * -ck2;
        }

        if (pt.dupire_active) {
            const double k2c = pt.fwd_strike * pt.fwd_strike * ck2;
            const double numer = f.c_t * dT;
            const double denom = k2c * dkk;
            const bool guarded = !(denom > cfg.guard);
            const double d_eff = guarded ? cfg.guard : denom;
            const double dup = numer / d_eff;
            if (guarded) ++out.loss.guard_hits;
            double slope = 0.0;
            if (dup > cfg.band.high) {
                out.loss.pen_dupire += dup - cfg.band.high;
                slope = 1.0;
            } else if (dup < cfg.band.low) {
                out.loss.pen_dupire += cfg.band.low - dup;
                slope = -1.0;
            }
            if (slope != 0.0 && lam.dupire != 0.0) {
                const double s = weight * lam.dupire * slope;
                adj_t[i] += s * f.c_t / d_eff;
                if (!guarded) adj_s[i] += s * -numer * k2c / (denom * denom);
            }
        }
    }
    if (want_gradient) {
        out.gradient = backprop_sensitivities(params, ts, ks, adj_v, adj_t, adj_s);
        out.has_gradient = true;
    }
    return out;
}

struct BlockSpec {
    std::span<const TrainingPoint> points;
    bool with_fit;
    double weight;
};

LossAndGradient evaluate(const NetParams& params, std::span<const TrainingPoint> points,
                         const ObjectiveConfig& cfg, bool want_gradient) {
    if (points.empty()) throw std::invalid_argument("loss: empty training set");
    cfg.lambda.validate();
    cfg.band.validate();
    const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.block_size));

    std::vector<BlockSpec> blocks;
    auto add_blocks = [&](std::span<const TrainingPoint> pts, bool with_fit) {
        if (pts.empty()) return;
        const double w = 1.0 / static_cast<double>(pts.size());
        for (std::size_t s = 0; s < pts.size(); s += bs) {
            blocks.push_back({pts.subspan(s, std::min(bs, pts.size() - s)), with_fit, w});
        }
    };
    add_blocks(points, true);
    add_blocks(cfg.aux_sites, false);

    std::vector<BlockResult> results(blocks.size());
    const int threads = std::clamp(cfg.threads, 1, static_cast<int>(blocks.size()));
    auto work = [&](int tid) {
        for (std::size_t b = static_cast<std::size_t>(tid); b < blocks.size();
             b += static_cast<std::size_t>(threads)) {
            results[b] = evaluate_block(params, blocks[b].points, blocks[b].with_fit,
                                        blocks[b].weight, cfg, want_gradient);
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }

    // Fixed-order reduction; penalties are averaged within each site set.
    LossAndGradient out;
    out.gradient = params.zeros_like();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const double w = blocks[b].weight;
        const LossBreakdown& l = results[b].loss;
        out.loss.fit_l1 += w * l.fit_l1;
        out.loss.pen_calendar += w * l.pen_calendar;
        out.loss.pen_butterfly += w * l.pen_butterfly;
        out.loss.pen_dupire += w * l.pen_dupire;
        out.loss.guard_hits += l.guard_hits;
        if (want_gradient) {
            const NetParams& g = results[b].gradient;
            out.gradient.w1 += g.w1;
            out.gradient.b1 += g.b1;
            out.gradient.w2 += g.w2;
            out.gradient.b2 += g.b2;
            out.gradient.w3 += g.w3;
            out.gradient.b3 += g.b3;
        }
    }
    const PenaltyWeights& lam = cfg.lambda;
    out.loss.total = out.loss.fit_l1 + lam.calendar * out.loss.pen_calendar +
                     lam.butterfly * out.loss.pen_butterfly + lam.dupire * out.loss.pen_dupire;
    return out;
}

}  // namespace

LossBreakdown loss(const NetParams& params, std::span<const TrainingPoint> points,
                   const ObjectiveConfig& cfg) {
    return evaluate(params, points, cfg, false).loss;
}

LossAndGradient loss_and_gradient(const NetParams& params, std::span<const TrainingPoint> points,
                                  const ObjectiveConfig& cfg) {
    return evaluate(params, points, cfg, true);
}

NetParams loss_gradient(const NetParams& params, std::span<const TrainingPoint> points,
                        const ObjectiveConfig& cfg) {
    return evaluate(params, points, cfg, true).gradient;
}

}  // namespace lvnn
