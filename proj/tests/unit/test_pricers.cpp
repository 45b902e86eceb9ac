#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lvnn/errors.hpp"
#include "lvnn/pricers.hpp"

using namespace lvnn;

TEST_SUITE("pricers") {

TEST_CASE("normal cdf reference values") {
    CHECK(norm_cdf(0.0) == 0.5);
    CHECK(norm_cdf(1.0) == doctest::Approx(0.841344746068542948585).epsilon(1e-14));
    CHECK(norm_cdf(-3.0) == doctest::Approx(0.00134989803163009452665).epsilon(1e-13));
    CHECK(norm_cdf(-10.0) == doctest::Approx(7.61985302416052606597e-24).epsilon(1e-12));
}

TEST_CASE("Black-Scholes put reference and limits") {
    CHECK(bs_put(100, 100, 1, 0, 0, 0.2) == doctest::Approx(7.965567455405804).epsilon(1e-12));
    CHECK(std::abs(bs_put(100, 100, 1, 0, 0, 0.2) - 7.9656) < 5e-5);
    CHECK(bs_put(100, 110, 0.0, 0.05, 0.0, 0.3) == 10.0);
    CHECK(bs_put(100, 90, 0.0, 0.05, 0.0, 0.3) == 0.0);
    CHECK(bs_put(100, 110, 2.0, 0.05, 0.01, 0.0) ==
          doctest::Approx(std::max(110 * std::exp(-0.1) - 100 * std::exp(-0.02), 0.0)));
    CHECK(bs_put(100, 80, 2.0, 0.05, 0.0, 0.0) == 0.0);
    // Put-call parity with dividends.
    const double S = 100, K = 95, T = 1.5, r = 0.03, q = 0.01, s = 0.25;
    const double sd = s * std::sqrt(T);
    const double d1 = (std::log(S / K) + (r - q) * T) / sd + 0.5 * sd;
    const double call = S * std::exp(-q * T) * norm_cdf(d1) - K * std::exp(-r * T) * norm_cdf(d1 - sd);
    CHECK(call - bs_put(S, K, T, r, q, s) == doctest::Approx(S * std::exp(-q * T) - K * std::exp(-r * T)).epsilon(1e-12));
    CHECK_THROWS_AS(bs_put(100, -1, 1, 0, 0, 0.2), std::invalid_argument);
}

TEST_CASE("implied vol inverts the closed form") {
    CHECK(implied_vol(7.9656, 100, 100, 1, 0, 0) == doctest::Approx(0.2).epsilon(1e-4));
    for (double sigma = 0.05; sigma <= 1.0 + 1e-12; sigma += 0.05) {
        for (double K : {80.0, 100.0, 125.0}) {
            const double p = bs_put(100, K, 0.75, 0.02, 0.01, sigma);
            CHECK(std::abs(implied_vol(p, 100, K, 0.75, 0.02, 0.01) - sigma) < 1e-8);
        }
    }
    // Near the floor of the vol bracket: ATM price ~ 0.4 sigma S sqrt(T).
    CHECK(implied_vol(bs_put(100, 100, 1, 0, 0, 5e-4), 100, 100, 1, 0, 0) == doctest::Approx(5e-4).epsilon(1e-6));
    CHECK_THROWS_AS(implied_vol(1e-6, 100, 100, 1, 0, 0), NumericalError);
    CHECK_THROWS_AS(implied_vol(200.0, 100, 100, 1, 0, 0), NumericalError);
    CHECK_THROWS_AS(implied_vol(-1.0, 100, 100, 1, 0, 0), NumericalError);
}

TEST_CASE("local vol functions clamp") {
    const LocalVolFn flat = flat_local_vol(0.2);
    CHECK(flat(0.3, 80.0) == 0.2);
    const LocalVolFn smile = smile_local_vol(100.0);
    CHECK(smile(0.0, 100.0) == doctest::Approx(0.2));
    CHECK(smile(0.5, 50.0) == doctest::Approx(0.2 + 0.003 * std::pow(std::log(0.5), 2) * std::exp(-0.5)));
    CHECK(smile(0.0, 1e-8) == doctest::Approx(0.4));
    CHECK(smile(1.0, 1e8) <= 0.4);
}

TEST_CASE("trinomial tree against the closed form") {
    const TermStructure zero = TermStructure::flat(0.0);
    const double ref = bs_put(100, 100, 1, 0, 0, 0.2);
    CHECK(std::abs(trinomial_put(flat_local_vol(0.2), 100, 100, 1, zero, zero, 200) - ref) < 0.02);
    CHECK(std::abs(trinomial_put(flat_local_vol(0.05), 100, 100, 1, zero, zero, 200) -
                   bs_put(100, 100, 1, 0, 0, 0.05)) < 0.02);
    CHECK(trinomial_put(flat_local_vol(0.2), 100, 1e-3, 1, zero, zero, 200) < 1e-10);
    CHECK(trinomial_put(flat_local_vol(0.2), 100, 110, 0.0, zero, zero, 200) == 10.0);

    const TermStructure r = TermStructure::flat(0.04), q = TermStructure::flat(0.015);
    for (double K : {80.0, 100.0, 120.0}) {
        CHECK(std::abs(trinomial_put(flat_local_vol(0.25), 100, K, 1.5, r, q, 400) -
                       bs_put(100, K, 1.5, 0.04, 0.015, 0.25)) < 0.02);
    }
}

TEST_CASE("trinomial tree converges as steps double") {
    const TermStructure zero = TermStructure::flat(0.0);
    for (double K : {100.0, 90.0}) {
        const double ref = bs_put(100, K, 1, 0, 0, 0.2);
        double prev = std::abs(trinomial_put(flat_local_vol(0.2), 100, K, 1, zero, zero, 50) - ref);
        for (int n : {100, 200, 400}) {
            const double err = std::abs(trinomial_put(flat_local_vol(0.2), 100, K, 1, zero, zero, n) - ref);
            INFO("K=" << K << " n=" << n << " err=" << err << " prev=" << prev);
            CHECK(err <= 0.7 * prev);
            prev = err;
        }
    }
}

TEST_CASE("chain generation") {
    SyntheticChainSpec spec;
    spec.maturities = linspace(0.1, 2.0, 10);
    spec.strikes = linspace(60.0, 140.0, 20);
    const auto flat = generate_chain(spec);
    CHECK(flat.size() == 200);
    for (const auto& q : flat) CHECK(std::abs(q.price - bs_put(100, q.strike, q.maturity, 0, 0, 0.2)) < 0.02);

    spec.vol = smile_local_vol(100.0);
    spec.rate = TermStructure::flat(0.02);
    const auto smile = generate_chain(spec);
    // Ground truth is arbitrage free: nondecreasing in K (calendar order is
    // checked on a zero-rate chain below).
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = 1; j < 20; ++j) CHECK(smile[i * 20 + j].price >= smile[i * 20 + j - 1].price);
    }

    spec.noise_scale = 0.1;
    spec.noise_seed = 9;
    const auto n1 = generate_chain(spec);
    const auto n2 = generate_chain(spec);
    for (std::size_t i = 0; i < n1.size(); ++i) CHECK(n1[i].price == n2[i].price);
    spec.noise_seed = 10;
    CHECK(generate_chain(spec)[0].price != n1[0].price);

    spec.tree_steps = 10;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("calendar monotonicity of zero-rate chains") {
    SyntheticChainSpec spec;
    spec.maturities = linspace(0.1, 2.0, 8);
    spec.strikes = linspace(60.0, 140.0, 9);
    spec.vol = smile_local_vol(100.0);
    const auto c = generate_chain(spec);
    for (std::size_t i = 1; i < 8; ++i) {
        for (std::size_t j = 0; j < 9; ++j) CHECK(c[i * 9 + j].price + 1e-10 >= c[(i - 1) * 9 + j].price);
    }
}

}  // TEST_SUITE
