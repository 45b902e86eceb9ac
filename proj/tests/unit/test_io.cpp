#include <doctest.h>

#include <fstream>
#include <stdexcept>

#include "helpers.hpp"
#include "lvnn/checkpoint.hpp"
#include "lvnn/csv_io.hpp"

using namespace lvnn;

TEST_SUITE("io") {

TEST_CASE("quote CSV round trip is bit exact") {
    testutil::TempDir dir("io");
    const std::vector<MarketQuote> q = {{0.1, 60.0, 0.0123456789012345}, {2.0, 140.0, 40.1 / 3.0}};
    io::write_quotes(dir.path() / "q.csv", q);
    const auto back = io::read_quotes(dir.path() / "q.csv");
    REQUIRE(back.size() == q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(back[i].maturity == q[i].maturity);
        CHECK(back[i].strike == q[i].strike);
        CHECK(back[i].price == q[i].price);
    }
}

TEST_CASE("curve CSV round trip") {
    testutil::TempDir dir("io");
    const TermStructure c({0.0, 0.5, 3.0}, {0.01, 0.02 / 3.0, -0.001});
    io::write_curve(dir.path() / "r.csv", c);
    const TermStructure back = io::read_curve(dir.path() / "r.csv");
    CHECK(back.knot_times() == c.knot_times());
    CHECK(back.values() == c.values());
}

TEST_CASE("malformed CSV input is rejected") {
    testutil::TempDir dir("io");
    const auto p = dir.path() / "bad.csv";
    {
        std::ofstream(p) << "T,K,price\n1.0,abc,3\n";
    }
    CHECK_THROWS(io::read_quotes(p));
    {
        std::ofstream(p) << "T,K\n1.0,2.0\n";
    }
    CHECK_THROWS(io::read_quotes(p));
    {
        std::ofstream(p) << "T,K,price\n1.0,2.0\n";
    }
    CHECK_THROWS(io::read_quotes(p));
    CHECK_THROWS(io::read_quotes(dir.path() / "missing.csv"));
}

TEST_CASE("checkpoint round trip preserves every parameter") {
    testutil::TempDir dir("io");
    for (auto mode : {ArchitectureMode::DenseSoft, ArchitectureMode::SparseSoft, ArchitectureMode::SparseHard}) {
        Checkpoint ck;
        ck.params = testutil::random_net(mode, 6, 5, 42);
        ck.box = ScalingBox(0.0, 2.0, 60.0, 140.0);
        save_checkpoint(dir.path() / "ck.json", ck);
        const Checkpoint back = load_checkpoint(dir.path() / "ck.json");
        CHECK(back.params == ck.params);
        REQUIRE(back.box.has_value());
        CHECK(back.box->k_max == 140.0);
    }
}

TEST_CASE("checkpoint rejects malformed documents") {
    Checkpoint ck;
    ck.params = init_params(ArchitectureMode::DenseSoft, {3, 3}, 1);
    nlohmann::json doc = to_json(ck);
    CHECK_NOTHROW(checkpoint_from_json(doc));
    auto bad = doc;
    bad["w2"] = nlohmann::json::array({1.0});
    CHECK_THROWS_AS(checkpoint_from_json(bad), std::invalid_argument);
    bad = doc;
    bad["version"] = 99;
    CHECK_THROWS_AS(checkpoint_from_json(bad), std::invalid_argument);
    bad = doc;
    bad.erase("b3");
    CHECK_THROWS_AS(checkpoint_from_json(bad), std::invalid_argument);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ck.json"), std::invalid_argument);
}

}  // TEST_SUITE
