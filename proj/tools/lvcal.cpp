// lvcal: command-line driver for synthetic generation, calibration, audits,
// local-vol extraction and Monte Carlo backtests.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "lvnn/cli/commands.hpp"
#include "lvnn/cli/run_config.hpp"

namespace {

using nlohmann::json;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    std::optional<std::string> optimizer;
    std::optional<double> lambda1, lambda2, lambda3;
    std::optional<double> band_low, band_high;
    std::optional<int> epochs;
    std::optional<int> paths;
    std::optional<int> steps;
    std::optional<std::string> source;
    std::optional<std::string> checkpoint;
    std::optional<std::string> quotes;
    bool force = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON run configuration");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_flag("--force", o.force, "overwrite existing outputs");
}

json apply_overrides(json doc, const Overrides& o) {
    if (!doc.is_object()) doc = json::object();
    if (o.seed) doc["seed"] = *o.seed;
    if (o.out) doc["out"] = *o.out;
    if (o.mode) doc["train"]["mode"] = *o.mode;
    if (o.optimizer) doc["train"]["optimizer"] = *o.optimizer;
    if (o.epochs) doc["train"]["epochs"] = *o.epochs;
    if (o.lambda1 || o.lambda2 || o.lambda3) {
        json lam = doc["train"].value("lambda", json::array({1.0, 1.0, 1.0}));
        if (o.lambda1) lam[0] = *o.lambda1;
        if (o.lambda2) lam[1] = *o.lambda2;
        if (o.lambda3) lam[2] = *o.lambda3;
        doc["train"]["lambda"] = lam;
    }
    if (o.band_low || o.band_high) {
        json band = doc["train"].value("band", json::array({0.05 * 0.05 / 2, 0.4 * 0.4 / 2}));
        if (o.band_low) band[0] = *o.band_low;
        if (o.band_high) band[1] = *o.band_high;
        doc["train"]["band"] = band;
    }
    if (o.paths) doc["backtest"]["paths"] = *o.paths;
    if (o.steps) doc["backtest"]["steps"] = *o.steps;
    if (o.source) doc["backtest"]["source"] = *o.source;
    return doc;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
    // Training allocates the same large temporaries every epoch; keep them on the heap.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"Neural local-volatility calibration toolkit"};
    app.require_subcommand(1);
    Overrides o;

    auto* gen = app.add_subcommand("generate", "price synthetic train/test chains under a known local vol");
    auto* cal = app.add_subcommand("calibrate", "train the price network");
    auto* aud = app.add_subcommand("audit", "arbitrage scan and accuracy metrics for a checkpoint");
    auto* lv = app.add_subcommand("localvol", "extract the local-vol surface from a checkpoint");
    auto* bt = app.add_subcommand("backtest", "Monte Carlo repricing under a local-vol source");
    auto* iv = app.add_subcommand("implied-vol", "invert quotes to Black-Scholes implied vols");
    for (auto* cmd : {gen, cal, aud, lv, bt, iv}) add_common(cmd, o);

    cal->add_option("--mode", o.mode, "dense-soft | sparse-soft | sparse-hard");
    cal->add_option("--optimizer", o.optimizer, "adam | rmsprop | nesterov");
    cal->add_option("--epochs", o.epochs, "maximum epochs");
    cal->add_option("--lambda1", o.lambda1, "calendar penalty weight");
    cal->add_option("--lambda2", o.lambda2, "butterfly penalty weight");
    cal->add_option("--lambda3", o.lambda3, "Dupire band penalty weight");
    cal->add_option("--band-low", o.band_low, "lower half-variance bound");
    cal->add_option("--band-high", o.band_high, "upper half-variance bound");
    for (auto* cmd : {aud, lv, bt}) cmd->add_option("--checkpoint", o.checkpoint, "checkpoint JSON");
    bt->add_option("--paths", o.paths, "Monte Carlo paths");
    bt->add_option("--steps", o.steps, "time steps to the longest maturity");
    bt->add_option("--source", o.source, "network | truth | grid");
    iv->add_option("--quotes", o.quotes, "quote CSV (T,K,price)");

    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();

    lvnn::cli::RunConfig cfg;
    try {
        json doc = json::object();
        std::filesystem::path base;
        if (!o.config.empty()) {
            std::ifstream in(o.config);
            if (!in) throw std::invalid_argument("cannot open config " + o.config);
            doc = json::parse(in);
            base = std::filesystem::path(o.config).parent_path();
        }
        cfg = lvnn::cli::parse_run_config(apply_overrides(std::move(doc), o), base);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return lvnn::cli::kExitConfig;
    }

    lvnn::cli::CommandOptions opts;
    opts.force = o.force;
    if (o.checkpoint) opts.checkpoint = *o.checkpoint;
    if (o.quotes) opts.quotes = *o.quotes;
    return lvnn::cli::run_command(name, cfg, opts, std::cout, std::cerr);
}
