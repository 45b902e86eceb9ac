#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "lvnn/objective.hpp"
#include "lvnn/pricers.hpp"

using namespace lvnn;

namespace {

std::vector<TrainingPoint> random_points(std::mt19937_64& rng, int n, bool with_payoff_row) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TrainingPoint> pts;
    for (int i = 0; i < n; ++i) {
        const double ks = u(rng);
        pts.push_back({u(rng), ks, 60.0 + 80.0 * ks, 3.0 * u(rng), true});
    }
    if (with_payoff_row) pts.push_back({0.0, 0.4, 92.0, 0.0, false});
    return pts;
}

}  // namespace

TEST_SUITE("objective") {

TEST_CASE("Dupire half-variance of the flat Black-Scholes surface") {
    // Raw-unit derivatives of the closed-form put at T = 0.5, k = S0.
    const double k = 100.0, T = 0.5;
    auto F = [&](double t, double kk) { return bs_put(100.0, kk, t, 0.0, 0.0, 0.2); };
    EvalResult e;
    e.value = F(T, k);
    e.dT = testutil::d1([&](double t) { return F(t, k); }, T, 1e-3);
    e.dkk = testutil::d2([&](double x) { return F(T, x); }, k, 1e-2);
    const DupireValue d = dupire_half_variance(e, k, {1.0, 1.0});
    CHECK_FALSE(d.guard_bound);
    CHECK(std::abs(d.dup - 0.02) < 1e-3);
}

TEST_CASE("Dupire half-variance edge cases") {
    CHECK(dupire_half_variance({1.0, 0.0, 0.0, 0.5}, 100.0, {1.0, 1.0}).dup == 0.0);
    const DupireValue g = dupire_half_variance({1.0, 1.0, 0.0, 0.0}, 1.0, {1.0, 1.0});
    CHECK(g.guard_bound);
    CHECK(g.dup == doctest::Approx(1.0 / kDupireGuard));
    // Scale factors enter as cT / (k^2 ck^2).
    const DupireValue s = dupire_half_variance({0.0, 0.3, 0.0, 0.6}, 2.0, {0.5, 0.25});
    CHECK(s.dup == doctest::Approx(0.5 * 0.3 / (4.0 * 0.0625 * 0.6)).epsilon(1e-15));
}

TEST_CASE("penalty vector examples") {
    const HalfVarianceBand band;
    CHECK(band.low == doctest::Approx(0.00125));
    CHECK(band.high == doctest::Approx(0.08));

    // dup = 0.1 / 0.2 = 0.5 with k = 1: inside a wide band.
    const PenaltyVector in = penalty_vector({0.0, 0.1, 0.0, 0.2}, 1.0, {1.0, 1.0}, {0.01, 1.0});
    CHECK(in.calendar == 0.0);
    CHECK(in.butterfly == 0.0);
    CHECK(in.dupire == 0.0);

    const PenaltyVector cal = penalty_vector({0.0, -0.3, 0.0, 1.0}, 1.0, {1.0, 1.0}, band);
    CHECK(cal.calendar == doctest::Approx(0.3));

    // dup = 0.1 exactly (dT = 0.1, k^2 dkk = 1).
    const PenaltyVector hi = penalty_vector({0.0, 0.1, 0.0, 1.0}, 1.0, {1.0, 1.0}, band);
    CHECK(hi.dupire == doctest::Approx(0.02).epsilon(1e-12));

    const PenaltyVector fly = penalty_vector({0.0, 0.0, 0.0, -2.0}, 1.0, {1.0, 0.5}, band);
    CHECK(fly.butterfly == doctest::Approx(0.5));
}

TEST_CASE("zero penalty iff shape conditions hold and dup is in band") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const HalfVarianceBand band{0.01, 0.5};
    for (int i = 0; i < 2000; ++i) {
        const EvalResult e{0.0, u(rng), 0.0, u(rng)};
        const ScaleFactors f{0.5, 0.02};
        const double k = 60.0 + 40.0 * (u(rng) + 1.0);
        const PenaltyVector phi = penalty_vector(e, k, f, band);
        const DupireValue d = dupire_half_variance(e, k, f);
        const bool zero = phi.calendar == 0.0 && phi.butterfly == 0.0 && phi.dupire == 0.0;
        const bool feasible = e.dT >= 0.0 && e.dkk >= 0.0 && !d.guard_bound && d.dup >= band.low &&
                              d.dup <= band.high;
        CHECK(zero == feasible);
    }
}

TEST_CASE("loss examples") {
    const NetParams p = testutil::random_net(ArchitectureMode::DenseSoft, 6, 5, 10);
    std::mt19937_64 rng(1);
    auto pts = random_points(rng, 12, true);

    ObjectiveConfig cfg;
    cfg.factors = {0.5, 0.0125};
    double mae = 0.0;
    for (const auto& pt : pts) mae += std::abs(pt.target - forward(p, pt.t_scaled, pt.k_scaled));
    mae /= static_cast<double>(pts.size());
    CHECK(loss(p, pts, cfg).total == doctest::Approx(mae).epsilon(1e-13));

    std::vector<TrainingPoint> none;
    CHECK_THROWS_AS(loss(p, none, cfg), std::invalid_argument);
    cfg.lambda = {-1.0, 0.0, 0.0};
    CHECK_THROWS_AS(loss(p, pts, cfg), std::invalid_argument);
}

TEST_CASE("perfect feasible fit has zero loss and zero gradient") {
    const NetParams p = testutil::random_net(ArchitectureMode::SparseHard, 6, 5, 12);
    std::mt19937_64 rng(2);
    auto pts = random_points(rng, 10, false);
    // Targets from the same batched evaluation the loss uses, so residuals are exactly zero.
    std::vector<double> ts, ks;
    for (const auto& pt : pts) {
        ts.push_back(pt.t_scaled);
        ks.push_back(pt.k_scaled);
    }
    const BatchEval ev = forward_with_sensitivities(p, ts, ks);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i].target = ev.value[static_cast<Eigen::Index>(i)];
        pts[i].dupire_active = false;
    }
    ObjectiveConfig cfg;
    cfg.factors = {0.5, 0.0125};
    cfg.lambda = {1.0, 1.0, 1.0};
    const LossAndGradient lg = loss_and_gradient(p, pts, cfg);
    CHECK(lg.loss.total == 0.0);

    cfg.lambda = {};
    const Eigen::VectorXd g = flatten(loss_gradient(p, pts, cfg));
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("paper multipliers on a single calendar violation") {
    // Find a point where the dense net decreases in T but is convex in k, then
    // choose cT so that phi1 = 1e-4 exactly.
    const NetParams p = testutil::random_net(ArchitectureMode::DenseSoft, 8, 6, 3);
    TrainingPoint pt;
    EvalResult e;
    bool found = false;
    for (int i = 0; i <= 20 && !found; ++i) {
        for (int j = 0; j <= 20 && !found; ++j) {
            e = forward_with_sensitivities(p, i / 20.0, j / 20.0);
            if (e.dT < -1e-6 && e.dkk > 1e-6) {
                pt = {i / 20.0, j / 20.0, 100.0, e.value, false};
                found = true;
            }
        }
    }
    REQUIRE(found);
    ObjectiveConfig cfg;
    cfg.factors = {1e-4 / -e.dT, 0.01};
    cfg.lambda = {1e5, 1e3, 10.0};
    const std::vector<TrainingPoint> one = {pt};
    const LossBreakdown l = loss(p, one, cfg);
    CHECK(l.fit_l1 == 0.0);
    CHECK(l.pen_calendar == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(l.pen_butterfly == 0.0);
    CHECK(l.total == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("breakdown additivity and nonnegativity") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mode = static_cast<ArchitectureMode>(trial % 3);
        const NetParams p = testutil::random_net(mode, 8, 6, 200 + static_cast<std::uint64_t>(trial));
        auto pts = random_points(rng, 15, true);
        ObjectiveConfig cfg;
        cfg.factors = {0.5, 0.0125};
        cfg.lambda = {1.7, 0.3, 2.9};
        cfg.aux_sites = make_aux_grid(4, ScalingBox(0.0, 2.0, 60.0, 140.0));
        const LossBreakdown l = loss(p, pts, cfg);
        CHECK(l.total == l.fit_l1 + cfg.lambda.calendar * l.pen_calendar +
                             cfg.lambda.butterfly * l.pen_butterfly + cfg.lambda.dupire * l.pen_dupire);
        CHECK(l.fit_l1 >= 0.0);
        CHECK(l.pen_calendar >= 0.0);
        CHECK(l.pen_butterfly >= 0.0);
        CHECK(l.pen_dupire >= 0.0);
    }
}

TEST_CASE("gradient matches finite differences on a small net") {
    const NetParams p = testutil::random_net(ArchitectureMode::DenseSoft, 4, 4, 17);
    const std::vector<TrainingPoint> one = {{0.3, 0.6, 108.0, 2.5, true}};
    ObjectiveConfig cfg;
    cfg.factors = {0.5, 0.0125};
    cfg.lambda = {1.0, 1.0, 1.0};
    const auto r = gradcheck::check(p, one, cfg);
    CHECK(r.checked > 20);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gradient check over modes and multiplier patterns") {
    const PenaltyWeights patterns[] = {{0, 0, 0}, {1, 1, 0}, {1, 1, 1}};
    std::mt19937_64 rng(123);
    int checked = 0;
    for (int c = 0; c < 20; ++c) {
        const auto mode = static_cast<ArchitectureMode>(c % 3);
        const NetParams p = testutil::random_net(mode, 5, 4, 300 + static_cast<std::uint64_t>(c));
        auto pts = random_points(rng, 4, c % 2 == 0);
        ObjectiveConfig cfg;
        cfg.factors = {0.5, 0.0125};
        cfg.lambda = patterns[c % 3];
        cfg.band = {0.00125, 0.08};
        if (c % 4 == 1) cfg.aux_sites = make_aux_grid(3, ScalingBox(0.0, 2.0, 60.0, 140.0));
        const auto r = gradcheck::check(p, pts, cfg);
        INFO("config " << c << " checked " << r.checked << " skipped " << r.skipped);
        CHECK(r.max_rel_error < 1e-4);
        checked += r.checked;
    }
    CHECK(checked > 500);
}

TEST_CASE("Dupire multiplier zero removes the band's influence on the gradient") {
    const NetParams p = testutil::random_net(ArchitectureMode::DenseSoft, 6, 6, 41);
    std::mt19937_64 rng(41);
    const auto pts = random_points(rng, 10, true);
    ObjectiveConfig a;
    a.factors = {0.5, 0.0125};
    a.lambda = {1.0, 1.0, 0.0};
    ObjectiveConfig b = a;
    b.band = {1e-6, 1e-5};
    CHECK(flatten(loss_gradient(p, pts, a)) == flatten(loss_gradient(p, pts, b)));
}

TEST_CASE("dup is invariant to the scaling chart") {
    // Two boxes around the same raw surface: fold the affine change of chart
    // into the first layer and compare dup at shared raw points.
    const ScalingBox box1(0.1, 2.0, 60.0, 140.0);
    const ScalingBox box2(0.0, 3.0, 40.0, 170.0);
    const NetParams p1 = testutil::random_net(ArchitectureMode::SparseHard, 8, 6, 55);  // convex in k
    NetParams p2 = p1;
    const double at = (box2.t_max - box2.t_min) / (box1.t_max - box1.t_min);
    const double ct = (box2.t_min - box1.t_min) / (box1.t_max - box1.t_min);
    const double ak = (box2.k_max - box2.k_min) / (box1.k_max - box1.k_min);
    const double ck = (box2.k_min - box1.k_min) / (box1.k_max - box1.k_min);
    p2.w1.col(0) = p1.w1.col(0) * at;
    p2.w1.col(1) = p1.w1.col(1) * ak;
    p2.b1 = p1.b1 + p1.w1.col(0) * ct + p1.w1.col(1) * ck;

    const ScaleFactors f1 = derivative_scale_factors(box1), f2 = derivative_scale_factors(box2);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> t(0.2, 1.9), k(65.0, 135.0);
    int compared = 0;
    for (int i = 0; i < 200; ++i) {
        const double T = t(rng), K = k(rng);
        const auto [a1, b1] = box1.scale(T, K);
        const auto [a2, b2] = box2.scale(T, K);
        const DupireValue d1 = dupire_half_variance(forward_with_sensitivities(p1, a1, b1), K, f1, 1e-14);
        const DupireValue d2 = dupire_half_variance(forward_with_sensitivities(p2, a2, b2), K, f2, 1e-14);
        if (d1.guard_bound || d2.guard_bound) continue;
        ++compared;
        CHECK(std::abs(d1.dup - d2.dup) <= 1e-8 * std::max(1.0, std::abs(d1.dup)));
    }
    CHECK(compared > 100);
}

TEST_CASE("threaded evaluation agrees with the sequential mode") {
    const NetParams p = testutil::random_net(ArchitectureMode::SparseSoft, 10, 8, 6);
    std::mt19937_64 rng(6);
    const auto pts = random_points(rng, 300, true);
    ObjectiveConfig seq;
    seq.factors = {0.5, 0.0125};
    seq.lambda = {1.0, 2.0, 3.0};
    seq.block_size = 32;
    ObjectiveConfig par = seq;
    par.threads = 4;
    const LossAndGradient a = loss_and_gradient(p, pts, seq);
    const LossAndGradient b = loss_and_gradient(p, pts, par);
    CHECK(a.loss.total == b.loss.total);  // fixed-order reduction
    CHECK(flatten(a.gradient) == flatten(b.gradient));
    ObjectiveConfig big = seq;
    big.block_size = 1000;
    const LossAndGradient c = loss_and_gradient(p, pts, big);
    CHECK(c.loss.total == doctest::Approx(a.loss.total).epsilon(1e-12));
}

TEST_CASE("training points and auxiliary grid") {
    const ScalingBox box(0.0, 2.0, 60.0, 140.0);
    const std::vector<ForwardQuote> q = {{0.0, 90.0, 0.0}, {1.0, 100.0, 7.0}};
    const auto pts = make_training_points(q, box);
    CHECK_FALSE(pts[0].dupire_active);
    CHECK(pts[1].dupire_active);
    CHECK(pts[1].t_scaled == 0.5);
    CHECK(pts[1].k_scaled == 0.5);
    CHECK(pts[1].target == 7.0);
    const auto grid = make_aux_grid(5, box);
    CHECK(grid.size() == 25);
    CHECK(std::count_if(grid.begin(), grid.end(), [](const TrainingPoint& t) { return !t.dupire_active; }) == 5);
    CHECK_THROWS_AS(make_aux_grid(1, box), std::invalid_argument);
}

}  // TEST_SUITE
