#include "lvnn/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "lvnn/audit.hpp"
#include "lvnn/backtest.hpp"
#include "lvnn/checkpoint.hpp"
#include "lvnn/csv_io.hpp"
#include "lvnn/errors.hpp"
#include "lvnn/objective.hpp"
#include "lvnn/pricers.hpp"
#include "lvnn/trainer.hpp"

namespace lvnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stages files as hidden temporaries and renames them into place on commit;
// uncommitted temporaries are removed.
class OutputSet {
public:
    OutputSet(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    ~OutputSet() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& [tmp, final_path] : staged_) fs::remove(tmp, ec);
    }

    fs::path stage(const std::string& name) {
        const fs::path final_path = dir_ / name;
        if (!force_ && fs::exists(final_path)) {
            throw std::invalid_argument("refusing to overwrite " + final_path.string() +
                                        " (outputs are write-once; pass --force or a new --out)");
        }
        const fs::path tmp = dir_ / ("." + name + ".tmp");
        staged_.emplace_back(tmp, final_path);
        names_.push_back(name);
        return tmp;
    }

    void commit() {
        for (const auto& [tmp, final_path] : staged_) fs::rename(tmp, final_path);
        committed_ = true;
    }

    const std::vector<std::string>& names() const { return names_; }

private:
    fs::path dir_;
    bool force_;
    bool committed_ = false;
    std::vector<std::pair<fs::path, fs::path>> staged_;
    std::vector<std::string> names_;
};

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void stage_manifest(OutputSet& outs, const std::string& command, const RunConfig& cfg,
                    json extra = json::object()) {
    const fs::path path = outs.stage("manifest_" + command + ".json");
    json m;
    m["command"] = command;
    m["config_hash"] = config_hash(cfg.document);
    m["seed"] = cfg.seed;
    m["outputs"] = outs.names();
    m["config"] = cfg.document;
    for (auto& [k, v] : extra.items()) m[k] = v;
    write_json(path, m);
}

void ensure_out_dir(const RunConfig& cfg) { fs::create_directories(cfg.out); }

fs::path checkpoint_path(const RunConfig& cfg, const CommandOptions& opts) {
    return opts.checkpoint ? *opts.checkpoint : cfg.out / "checkpoint.json";
}

Checkpoint require_checkpoint(const RunConfig& cfg, const CommandOptions& opts) {
    const fs::path p = checkpoint_path(cfg, opts);
    if (!fs::exists(p)) throw std::invalid_argument("missing checkpoint " + p.string());
    Checkpoint ckpt = load_checkpoint(p);
    if (!ckpt.box) throw std::invalid_argument("checkpoint " + p.string() + " has no scaling box");
    return ckpt;
}

std::vector<MarketQuote> require_quotes(const fs::path& p) {
    if (!fs::exists(p)) throw std::invalid_argument("missing quote file " + p.string());
    return io::read_quotes(p);
}

SyntheticChainSpec chain_spec(const RunConfig& cfg, const TermStructure& r, const TermStructure& q,
                              bool train) {
    SyntheticChainSpec s;
    s.spot = cfg.spot;
    s.maturities = train ? cfg.chain.train_maturities : cfg.chain.test_maturities;
    s.strikes = train ? cfg.chain.train_strikes : cfg.chain.test_strikes;
    s.rate = r;
    s.dividend = q;
    s.vol = cfg.chain.vol.build(cfg.spot);
    s.tree_steps = cfg.chain.tree_steps;
    s.noise_scale = train ? cfg.chain.noise : 0.0;
    s.noise_seed = cfg.seed;
    return s;
}

struct ForwardColumns {
    std::vector<double> maturities;
    std::vector<double> fwd_strikes;
};

ForwardColumns forward_columns(const std::vector<MarketQuote>& quotes, const TermStructure& r,
                               const TermStructure& q) {
    ForwardColumns c;
    for (const auto& fq : to_forward(quotes, r, q)) {
        c.maturities.push_back(fq.maturity);
        c.fwd_strikes.push_back(fq.fwd_strike);
    }
    return c;
}

std::vector<double> prices_of(const std::vector<MarketQuote>& quotes) {
    std::vector<double> v;
    for (const auto& q : quotes) v.push_back(q.price);
    return v;
}

}  // namespace

void cmd_generate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const TermStructure r = cfg.rate_curve();
    const TermStructure q = cfg.dividend_curve();
    const SyntheticChainSpec train_spec = chain_spec(cfg, r, q, true);
    const SyntheticChainSpec test_spec = chain_spec(cfg, r, q, false);
    const auto train = generate_chain(train_spec);
    const auto test = generate_chain(test_spec);

    std::vector<std::vector<double>> vol_rows;
    const double t_hi = std::max(cfg.chain.train_maturities.back(), cfg.chain.test_maturities.back());
    for (double t : linspace(0.0, t_hi, 21)) {
        for (double s : linspace(0.5 * cfg.spot, 1.5 * cfg.spot, 41)) {
            vol_rows.push_back({t, s, train_spec.vol(t, s)});
        }
    }

    ensure_out_dir(cfg);
    OutputSet outs(cfg.out, opts.force);
    io::write_quotes(outs.stage("train_quotes.csv"), train);
    io::write_quotes(outs.stage("test_quotes.csv"), test);
    io::write_table(outs.stage("true_vol.csv"), {"t", "S", "sigma"}, vol_rows);
    stage_manifest(outs, "generate", cfg, {{"n_train", train.size()}, {"n_test", test.size()}});
    outs.commit();
    log << "generate: " << train.size() << " training and " << test.size() << " test quotes -> "
        << cfg.out.string() << '\n';
}

void cmd_calibrate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const TermStructure r = cfg.rate_curve();
    const TermStructure q = cfg.dividend_curve();
    const auto quotes = require_quotes(cfg.train_path());
    const auto augmented = augment_with_payoffs(std::span<const MarketQuote>(quotes), cfg.spot);
    const auto fwd = to_forward(augmented, r, q);
    const ScalingBox box = cfg.scaling_pad > 0.0 ? fit_scaling_padded(fwd, cfg.scaling_pad, cfg.scaling_pad)
                                                 : fit_scaling(fwd);
    const auto points = make_training_points(fwd, box);
    std::vector<TrainingPoint> aux;
    if (cfg.aux_grid > 0) aux = make_aux_grid(cfg.aux_grid, box);

    ensure_out_dir(cfg);
    OutputSet outs(cfg.out, opts.force);
    const fs::path ckpt_tmp = outs.stage("checkpoint.json");
    const fs::path report_tmp = outs.stage("train_report.json");
    const fs::path history_tmp = outs.stage("loss_history.csv");

    FitResult result;
    try {
        result = fit(points, cfg.train, derivative_scale_factors(box), std::move(aux));
    } catch (const TrainingDiverged& e) {
        OutputSet failed(cfg.out, true);
        write_json(failed.stage("train_report.json"), e.report().to_json());
        failed.commit();
        throw;
    }
    result.report.checkpoint = (cfg.out / "checkpoint.json").string();
    save_checkpoint(ckpt_tmp, {result.params, box});
    json report = result.report.to_json();
    report["mode"] = std::string(to_string(cfg.train.mode));
    report["optimizer"] = std::string(to_string(cfg.train.optimizer));
    report["n_points"] = points.size();
    write_json(report_tmp, report);
    result.report.write_history_csv(history_tmp);
    stage_manifest(outs, "calibrate", cfg, {{"best_loss", result.report.best_loss}});
    outs.commit();
    log << "calibrate: " << to_string(cfg.train.mode) << ", " << result.report.epochs_run
        << " epochs, best loss " << result.report.best_loss << " at epoch " << result.report.best_epoch
        << " (" << result.report.stop_reason << ")\n";
}

void cmd_audit(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const TermStructure r = cfg.rate_curve();
    const TermStructure q = cfg.dividend_curve();
    const Checkpoint ckpt = require_checkpoint(cfg, opts);
    const auto train = require_quotes(cfg.train_path());
    const bool have_test = fs::exists(cfg.test_path());
    const auto test = have_test ? io::read_quotes(cfg.test_path()) : std::vector<MarketQuote>{};
    const ScalingBox& box = *ckpt.box;

    json report;
    report["tolerance"] = cfg.violation_tol;

    const auto train_aug = augment_with_payoffs(std::span<const MarketQuote>(train), cfg.spot);
    const ForwardColumns tc = forward_columns(train_aug, r, q);
    const ViolationReport v_train = count_violations(ckpt.params, tc.maturities, tc.fwd_strikes, box, cfg.violation_tol);
    report["violations_train"] = v_train.to_json();

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> rt, rk;
    for (int i = 0; i < cfg.random_audit_points; ++i) {
        const auto [t, k] = box.unscale(u(rng), u(rng));
        rt.push_back(t);
        rk.push_back(k);
    }
    const ViolationReport v_rand = count_violations(ckpt.params, rt, rk, box, cfg.violation_tol);
    report["violations_random"] = v_rand.to_json();

    const auto pred_train = predict_prices(ckpt.params, train, box, r, q);
    report["rmse_price_train"] = rmse(pred_train, prices_of(train));
    const ImpliedVolRmse iv_train = implied_vol_rmse(pred_train, train, cfg.spot, r, q);
    report["rmse_iv_train"] = {{"rmse", iv_train.rmse}, {"n_used", iv_train.n_used}, {"n_failed", iv_train.n_failed}};

    ViolationReport v_test;
    if (have_test) {
        const ForwardColumns sc = forward_columns(test, r, q);
        v_test = count_violations(ckpt.params, sc.maturities, sc.fwd_strikes, box, cfg.violation_tol);
        report["violations_test"] = v_test.to_json();
        const auto pred_test = predict_prices(ckpt.params, test, box, r, q);
        report["rmse_price_test"] = rmse(pred_test, prices_of(test));
        const ImpliedVolRmse iv_test = implied_vol_rmse(pred_test, test, cfg.spot, r, q);
        report["rmse_iv_test"] = {{"rmse", iv_test.rmse}, {"n_used", iv_test.n_used}, {"n_failed", iv_test.n_failed}};
    }

    const SurfaceGrid prices = price_surface(ckpt.params, cfg.chain.test_maturities, cfg.chain.test_strikes, box, r, q);

    OutputSet outs(cfg.out, opts.force);
    write_json(outs.stage("audit_report.json"), report);
    write_violations_csv(outs.stage("violations_train.csv"), v_train);
    if (have_test) write_violations_csv(outs.stage("violations_test.csv"), v_test);
    write_surface_csv(outs.stage("price_surface.csv"), prices);
    stage_manifest(outs, "audit", cfg);
    outs.commit();
    log << "audit: train violations " << v_train.n_violating << "/" << v_train.n_points
        << ", random " << v_rand.n_violating << "/" << v_rand.n_points
        << ", train price RMSE " << report["rmse_price_train"].get<double>() << '\n';
}

void cmd_localvol(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const TermStructure r = cfg.rate_curve();
    const TermStructure q = cfg.dividend_curve();
    const Checkpoint ckpt = require_checkpoint(cfg, opts);
    const SurfaceGrid grid = extract_local_vol(ckpt.params, cfg.localvol_grid.maturities,
                                               cfg.localvol_grid.strikes, *ckpt.box, r, q, cfg.train.guard);
    OutputSet outs(cfg.out, opts.force);
    write_surface_csv(outs.stage("localvol.csv"), grid);
    stage_manifest(outs, "localvol", cfg, {{"invalid_cells", grid.invalid_count()}});
    outs.commit();
    log << "localvol: " << grid.values.size() << " cells, " << grid.invalid_count() << " invalid\n";
}

void cmd_backtest(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const TermStructure r = cfg.rate_curve();
    const TermStructure q = cfg.dividend_curve();
    const auto quotes = require_quotes(cfg.backtest_quotes == "train" ? cfg.train_path() : cfg.test_path());

    VolSource source = cfg.chain.vol.build(cfg.spot);
    if (cfg.backtest_source == "network") {
        const Checkpoint ckpt = require_checkpoint(cfg, opts);
        NetworkVolSource net{ckpt.params, *ckpt.box};
        net.guard = cfg.train.guard;
        source = std::move(net);
    } else if (cfg.backtest_source == "grid") {
        if (!cfg.backtest_grid_file) throw std::invalid_argument("backtest.grid_file is required for source=grid");
        const io::Table t = io::read_table(*cfg.backtest_grid_file);
        if (t.header != std::vector<std::string>{"T", "K", "value", "flag"}) {
            throw std::invalid_argument("grid file must have header T,K,value,flag");
        }
        std::vector<double> ts, ks;
        for (const auto& row : t.rows) {
            if (ts.empty() || row[0] > ts.back()) ts.push_back(row[0]);
            if (ts.size() == 1) ks.push_back(row[1]);
        }
        if (ts.size() * ks.size() != t.rows.size()) throw std::invalid_argument("grid file is not a full T x K grid");
        SurfaceGrid g;
        g.maturities = ts;
        g.strikes = ks;
        g.values.resize(static_cast<Eigen::Index>(ts.size()), static_cast<Eigen::Index>(ks.size()));
        g.flags.resize(g.values.rows(), g.values.cols());
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto a = static_cast<Eigen::Index>(i / ks.size()), b = static_cast<Eigen::Index>(i % ks.size());
            g.values(a, b) = t.rows[i][2];
            g.flags(a, b) = static_cast<int>(t.rows[i][3]);
        }
        g.validate();
        source = std::move(g);
    }

    const BacktestResult res = backtest_rmse(source, quotes, cfg.spot, r, q, cfg.mc);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        rows.push_back({quotes[i].maturity, quotes[i].strike, quotes[i].price, res.mc_prices[i], res.std_errors[i]});
    }
    json report = res.to_json();
    report["source"] = cfg.backtest_source;
    report["quotes"] = cfg.backtest_quotes;
    report["mc"] = cfg.mc.to_json();

    ensure_out_dir(cfg);
    OutputSet outs(cfg.out, opts.force);
    write_json(outs.stage("backtest_report.json"), report);
    io::write_table(outs.stage("backtest_prices.csv"), {"T", "K", "price", "mc_price", "std_error"}, rows);
    stage_manifest(outs, "backtest", cfg);
    outs.commit();
    log << "backtest (" << cfg.backtest_source << "): RMSE " << res.rmse << ", pooled s.e. "
        << res.pooled_std_error << '\n';
}

void cmd_implied_vol(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const TermStructure r = cfg.rate_curve();
    const TermStructure q = cfg.dividend_curve();
    const auto quotes = require_quotes(opts.quotes ? *opts.quotes : cfg.train_path());
    std::vector<std::vector<double>> rows;
    int failed = 0;
    for (const auto& qt : quotes) {
        double iv = std::nan("");
        if (qt.maturity > 0.0) {
            const double rr = r.integrate(0.0, qt.maturity) / qt.maturity;
            const double dd = q.integrate(0.0, qt.maturity) / qt.maturity;
            try {
                iv = implied_vol(qt.price, cfg.spot, qt.strike, qt.maturity, rr, dd);
            } catch (const NumericalError&) {
                ++failed;
            }
        } else {
            ++failed;
        }
        rows.push_back({qt.maturity, qt.strike, qt.price, iv, std::isnan(iv) ? 0.0 : 1.0});
    }
    ensure_out_dir(cfg);
    OutputSet outs(cfg.out, opts.force);
    io::write_table(outs.stage("implied_vols.csv"), {"T", "K", "price", "iv", "ok"}, rows);
    stage_manifest(outs, "implied-vol", cfg, {{"n_failed", failed}});
    outs.commit();
    log << "implied-vol: " << quotes.size() - static_cast<std::size_t>(failed) << " inverted, " << failed
        << " failed\n";
}

int run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& opts,
                std::ostream& log, std::ostream& err) {
    try {
        if (name == "generate") cmd_generate(cfg, opts, log);
        else if (name == "calibrate") cmd_calibrate(cfg, opts, log);
        else if (name == "audit") cmd_audit(cfg, opts, log);
        else if (name == "localvol") cmd_localvol(cfg, opts, log);
        else if (name == "backtest") cmd_backtest(cfg, opts, log);
        else if (name == "implied-vol") cmd_implied_vol(cfg, opts, log);
        else throw std::invalid_argument("unknown command '" + name + "'");
        return kExitOk;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace lvnn::cli
