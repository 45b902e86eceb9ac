#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <limits>
#include <random>
#include <vector>

#include "lvnn/curves.hpp"

using namespace lvnn;

TEST_SUITE("curves") {

TEST_CASE("integrate on flat and stepped curves") {
    CHECK(TermStructure::flat(0.05).integrate(0.0, 2.0) == doctest::Approx(0.10).epsilon(1e-15));
    const TermStructure steps({0.0, 1.0}, {0.02, 0.04});
    CHECK(steps.integrate(0.7, 0.7) == 0.0);
    CHECK(steps.integrate(0.5, 1.5) == doctest::Approx(0.03).epsilon(1e-14));
    CHECK(integrate(steps, 0.0, 3.0) == doctest::Approx(0.02 + 2 * 0.04).epsilon(1e-14));
    CHECK_THROWS_AS(steps.integrate(1.0, 0.5), std::invalid_argument);
}

TEST_CASE("term structure validation") {
    CHECK_THROWS_AS(TermStructure({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(TermStructure({0.0, 0.0}, {0.01, 0.02}), std::invalid_argument);
    CHECK_THROWS_AS(TermStructure({1.0, 0.5}, {0.01, 0.02}), std::invalid_argument);
    CHECK_THROWS_AS(TermStructure({-1.0}, {0.01}), std::invalid_argument);
    CHECK_THROWS_AS(TermStructure({0.0}, {0.01, 0.02}), std::invalid_argument);
}

TEST_CASE("integrate is additive") {
    const TermStructure ts({0.0, 0.25, 1.0, 2.0}, {0.01, -0.005, 0.03, 0.02});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 500; ++i) {
        double a = u(rng), c = u(rng);
        if (a > c) std::swap(a, c);
        const double b = a + (c - a) * 0.37;
        CHECK(std::abs(ts.integrate(a, c) - (ts.integrate(a, b) + ts.integrate(b, c))) <= 1e-14);
    }
    // Knot-aligned split points leave the rectangle decomposition unchanged.
    for (double b : {0.25, 1.0, 2.0}) {
        const double whole = ts.integrate(0.1, 2.5);
        const double parts = ts.integrate(0.1, b) + ts.integrate(b, 2.5);
        CHECK(std::abs(whole - parts) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(whole));
    }
}

TEST_CASE("to_forward examples") {
    const TermStructure zero = TermStructure::flat(0.0);
    const ForwardQuote id = to_forward(MarketQuote{0.5, 90.0, 3.0}, zero, zero);
    CHECK(id.maturity == 0.5);
    CHECK(id.fwd_strike == 90.0);
    CHECK(id.price == 3.0);

    const ForwardQuote a = to_forward(MarketQuote{1.0, 100.0, 5.0}, TermStructure::flat(0.05), zero);
    CHECK(a.fwd_strike == doctest::Approx(95.1229424500714).epsilon(1e-12));
    CHECK(a.price == doctest::Approx(5.0).epsilon(1e-15));

    const ForwardQuote b = to_forward(MarketQuote{2.0, 100.0, 5.0}, zero, TermStructure::flat(0.02));
    CHECK(b.fwd_strike == doctest::Approx(104.081077419239).epsilon(1e-12));
    CHECK(b.price == doctest::Approx(5.20405387096194).epsilon(1e-12));

    const MarketQuote ra = from_forward(a, TermStructure::flat(0.05), zero);
    const MarketQuote rb = from_forward(b, zero, TermStructure::flat(0.02));
    CHECK(ra.strike == doctest::Approx(100.0).epsilon(1e-13));
    CHECK(ra.price == doctest::Approx(5.0).epsilon(1e-13));
    CHECK(rb.strike == doctest::Approx(100.0).epsilon(1e-13));
    CHECK(rb.price == doctest::Approx(5.0).epsilon(1e-13));

    // T = 0 is the identity whatever the curves.
    const ForwardQuote z = to_forward(MarketQuote{0.0, 80.0, 0.0}, TermStructure::flat(0.3),
                                      TermStructure::flat(0.1));
    CHECK(z.fwd_strike == 80.0);
    CHECK(z.price == 0.0);
}

TEST_CASE("forward round trip on random curves and quotes") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> rate(-0.02, 0.08), t(0.0, 5.0), k(10.0, 300.0), p(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const TermStructure r({0.0, 0.5, 2.0}, {rate(rng), rate(rng), rate(rng)});
        const TermStructure q({0.0, 1.0}, {rate(rng), rate(rng)});
        const double T = t(rng);
        const double K = k(rng);
        const MarketQuote mq{T, K, p(rng) * K * std::exp(-r.integrate(0.0, T))};
        const MarketQuote back = from_forward(to_forward(mq, r, q), r, q);
        CHECK(std::abs(back.strike - K) <= 1e-12 * K);
        CHECK(std::abs(back.price - mq.price) <= 1e-12 * std::max(mq.price, 1e-300));
    }
}

TEST_CASE("to_forward preserves strike order at fixed maturity") {
    const TermStructure r({0.0, 1.0}, {0.03, 0.05});
    const TermStructure q = TermStructure::flat(0.01);
    double prev = 0.0;
    for (double K = 50.0; K <= 150.0; K += 5.0) {
        const double k = to_forward(MarketQuote{1.7, K, 1.0}, r, q).fwd_strike;
        CHECK(k > prev);
        prev = k;
    }
}

TEST_CASE("quote validation") {
    const TermStructure zero = TermStructure::flat(0.0);
    CHECK_NOTHROW(validate(MarketQuote{1.0, 100.0, 5.0}, zero));
    CHECK_THROWS_AS(validate(MarketQuote{-1.0, 100.0, 5.0}, zero), std::invalid_argument);
    CHECK_THROWS_AS(validate(MarketQuote{1.0, 0.0, 5.0}, zero), std::invalid_argument);
    CHECK_THROWS_AS(validate(MarketQuote{1.0, 100.0, -1.0}, zero), std::invalid_argument);
    CHECK_THROWS_AS(validate(MarketQuote{1.0, 100.0, 101.0}, zero), std::invalid_argument);
}

TEST_CASE("scaling box examples") {
    const ScalingBox unit_t(0.0, 1.0, 50.0, 150.0);
    auto [a, b] = unit_t.scale(0.5, 100.0);
    CHECK(a == doctest::Approx(0.5));
    CHECK(b == doctest::Approx(0.5));

    const ScalingBox box(0.0, 2.0, 80.0, 120.0);
    auto [c, d] = box.scale(1.5, 90.0);
    CHECK(c == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(d == doctest::Approx(0.25).epsilon(1e-15));

    const ScaleFactors unit = derivative_scale_factors(ScalingBox(0.0, 1.0, 0.0, 1.0));
    CHECK(unit.c_t == 1.0);
    CHECK(unit.c_k == 1.0);
    const ScaleFactors f = derivative_scale_factors(box);
    CHECK(f.c_t == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(f.c_k == doctest::Approx(0.025).epsilon(1e-15));

    CHECK_THROWS_AS(ScalingBox(1.0, 1.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ScalingBox(0.0, 1.0, 5.0, 5.0), std::invalid_argument);
}

TEST_CASE("scale and unscale are inverse bijections") {
    const ScalingBox box(0.05, 2.3, 61.5, 143.2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> t(0.05, 2.3), k(61.5, 143.2);
    for (int i = 0; i < 1000; ++i) {
        const double T = t(rng), K = k(rng);
        const auto [ts, ks] = box.scale(T, K);
        CHECK(ts >= 0.0);
        CHECK(ts <= 1.0);
        CHECK(ks >= 0.0);
        CHECK(ks <= 1.0);
        const auto [T2, K2] = box.unscale(ts, ks);
        CHECK(std::abs(T2 - T) <= 1e-12 * std::max(1.0, T));
        CHECK(std::abs(K2 - K) <= 1e-12 * K);
    }
}

TEST_CASE("fit_scaling uses the training hull") {
    const std::vector<ForwardQuote> q = {{0.1, 70.0, 1.0}, {2.0, 130.0, 2.0}, {1.0, 100.0, 3.0}};
    const ScalingBox box = fit_scaling(q);
    CHECK(box.t_min == 0.1);
    CHECK(box.t_max == 2.0);
    CHECK(box.k_min == 70.0);
    CHECK(box.k_max == 130.0);
    const ScalingBox padded = fit_scaling_padded(q, 0.0, 0.1);
    CHECK(padded.k_min == doctest::Approx(64.0));
    CHECK(padded.k_max == doctest::Approx(136.0));
    const std::vector<ForwardQuote> flat = {{1.0, 70.0, 1.0}, {1.0, 130.0, 2.0}};
    CHECK_THROWS_AS(fit_scaling(flat), std::invalid_argument);
}

}  // TEST_SUITE
