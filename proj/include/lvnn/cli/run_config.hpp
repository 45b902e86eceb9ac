#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvnn/backtest.hpp"
#include "lvnn/curves.hpp"
#include "lvnn/pricers.hpp"
#include "lvnn/trainer.hpp"

namespace lvnn::cli {

// Ground-truth local vol used for synthetic chains.
struct VolSpec {
    std::string kind = "smile";  // "smile" or "flat"
    double sigma = 0.2;          // flat level / smile base
    double curvature = 0.003;
    double lo = 0.05;
    double hi = 0.4;

    LocalVolFn build(double spot) const;
};

struct ChainConfig {
    std::vector<double> train_maturities = linspace(0.1, 2.0, 10);
    std::vector<double> train_strikes = linspace(60.0, 140.0, 20);
    std::vector<double> test_maturities = linspace(0.1, 2.0, 14);
    std::vector<double> test_strikes = linspace(62.0, 138.0, 25);
    int tree_steps = 200;
    double noise = 0.0;
    VolSpec vol;
};

struct GridAxes {
    std::vector<double> maturities;
    std::vector<double> strikes;
};

/**
 * Single configuration document for every command. Missing keys take the
 * defaults below; command-line flags are applied on top of the JSON before
 * parsing.
 */
struct RunConfig {
    std::uint64_t seed = 1;
    std::filesystem::path out = "run";
    double spot = 100.0;

    std::optional<std::filesystem::path> rate_file;
    std::optional<std::filesystem::path> dividend_file;
    double flat_rate = 0.0;
    double flat_dividend = 0.0;

    ChainConfig chain;
    std::optional<std::filesystem::path> train_file;
    std::optional<std::filesystem::path> test_file;

    TrainConfig train;
    int aux_grid = 0;          // n for an n x n penalty-only grid, 0 = off
    double scaling_pad = 0.0;  // fraction of width added around the training hull

    double violation_tol = 1e-6;
    int random_audit_points = 10000;
    GridAxes localvol_grid{linspace(0.1, 2.0, 20), linspace(60.0, 140.0, 41)};

    McConfig mc;
    std::string backtest_source = "network";  // network | truth | grid
    std::optional<std::filesystem::path> backtest_grid_file;
    std::string backtest_quotes = "train";    // train | test

    nlohmann::json document;  // the effective config, for hashing and echo

    TermStructure rate_curve() const;
    TermStructure dividend_curve() const;
    std::filesystem::path train_path() const;
    std::filesystem::path test_path() const;
};

// Parses the document; throws std::invalid_argument on bad keys or values.
// Relative file paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::filesystem::path& base_dir = {});

// FNV-1a of the canonical dump, hex encoded.
std::string config_hash(const nlohmann::json& doc);

}  // namespace lvnn::cli
