#include "lvnn/cli/run_config.hpp"

#include <cstdio>
#include <stdexcept>

#include "lvnn/csv_io.hpp"

namespace lvnn::cli {

LocalVolFn VolSpec::build(double spot) const {
    if (kind == "flat") return flat_local_vol(sigma);
    if (kind == "smile") return smile_local_vol(spot, sigma, curvature, lo, hi);
    throw std::invalid_argument("vol.kind must be 'flat' or 'smile', got '" + kind + "'");
}

TermStructure RunConfig::rate_curve() const {
    return rate_file ? io::read_curve(*rate_file) : TermStructure::flat(flat_rate);
}

TermStructure RunConfig::dividend_curve() const {
    return dividend_file ? io::read_curve(*dividend_file) : TermStructure::flat(flat_dividend);
}

std::filesystem::path RunConfig::train_path() const {
    return train_file ? *train_file : out / "train_quotes.csv";
}

std::filesystem::path RunConfig::test_path() const {
    return test_file ? *test_file : out / "test_quotes.csv";
}

namespace {

using nlohmann::json;

// An axis is either an explicit array or {"lo": a, "hi": b, "n": n}.
std::vector<double> parse_axis(const json& j, const char* name) {
    if (j.is_array()) return j.get<std::vector<double>>();
    if (j.is_object()) {
        return linspace(j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("n").get<int>());
    }
    throw std::invalid_argument(std::string(name) + ": expected an array or {lo, hi, n}");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_relative() && !base.empty()) ? base / path : path;
}

template <typename T>
void read_if(const json& j, const char* key, T& dst) {
    if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

void parse_train(const json& t, TrainConfig& cfg, RunConfig& rc) {
    if (t.contains("mode")) cfg.mode = parse_mode(t.at("mode").get<std::string>());
    if (t.contains("optimizer")) cfg.optimizer = parse_optimizer(t.at("optimizer").get<std::string>());
    read_if(t, "learning_rate", cfg.learning_rate);
    read_if(t, "epochs", cfg.max_epochs);
    read_if(t, "plateau_window", cfg.plateau_window);
    read_if(t, "lr_divisor", cfg.lr_divisor);
    read_if(t, "min_lr", cfg.min_lr);
    read_if(t, "improvement_tol", cfg.improvement_tol);
    read_if(t, "guard", cfg.guard);
    read_if(t, "threads", cfg.threads);
    read_if(t, "init_scale", cfg.init_scale);
    read_if(t, "penalty_warmup", cfg.penalty_warmup);
    read_if(t, "penalty_learning_rate", cfg.penalty_learning_rate);
    read_if(t, "aux_grid", rc.aux_grid);
    read_if(t, "scaling_pad", rc.scaling_pad);
    if (t.contains("widths")) {
        const auto w = t.at("widths").get<std::vector<int>>();
        if (w.size() != 2) throw std::invalid_argument("train.widths must have two entries");
        cfg.widths = {w[0], w[1]};
    }
    if (t.contains("lambda")) {
        const auto l = t.at("lambda").get<std::vector<double>>();
        if (l.size() != 3) throw std::invalid_argument("train.lambda must have three entries");
        cfg.lambda = {l[0], l[1], l[2]};
    }
    if (t.contains("band")) {
        const auto b = t.at("band").get<std::vector<double>>();
        if (b.size() != 2) throw std::invalid_argument("train.band must have two entries");
        cfg.band = {b[0], b[1]};
    }
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    RunConfig rc;
    rc.document = doc;
    try {
        read_if(doc, "seed", rc.seed);
        if (doc.contains("out")) rc.out = resolve(base_dir, doc.at("out").get<std::string>());
        read_if(doc, "spot", rc.spot);
        if (!(rc.spot > 0.0)) throw std::invalid_argument("spot must be > 0");

        if (doc.contains("curves")) {
            const json& c = doc.at("curves");
            if (c.contains("rate_file") && !c.at("rate_file").is_null())
                rc.rate_file = resolve(base_dir, c.at("rate_file").get<std::string>());
            if (c.contains("dividend_file") && !c.at("dividend_file").is_null())
                rc.dividend_file = resolve(base_dir, c.at("dividend_file").get<std::string>());
            read_if(c, "rate", rc.flat_rate);
            read_if(c, "dividend", rc.flat_dividend);
        }

        if (doc.contains("chain")) {
            const json& c = doc.at("chain");
            ChainConfig& ch = rc.chain;
            if (c.contains("train_maturities")) ch.train_maturities = parse_axis(c.at("train_maturities"), "chain.train_maturities");
            if (c.contains("train_strikes")) ch.train_strikes = parse_axis(c.at("train_strikes"), "chain.train_strikes");
            if (c.contains("test_maturities")) ch.test_maturities = parse_axis(c.at("test_maturities"), "chain.test_maturities");
            if (c.contains("test_strikes")) ch.test_strikes = parse_axis(c.at("test_strikes"), "chain.test_strikes");
            read_if(c, "tree_steps", ch.tree_steps);
            read_if(c, "noise", ch.noise);
            if (c.contains("vol")) {
                const json& v = c.at("vol");
                read_if(v, "kind", ch.vol.kind);
                read_if(v, "sigma", ch.vol.sigma);
                read_if(v, "curvature", ch.vol.curvature);
                read_if(v, "lo", ch.vol.lo);
                read_if(v, "hi", ch.vol.hi);
            }
        }

        if (doc.contains("data")) {
            const json& d = doc.at("data");
            if (d.contains("train_file") && !d.at("train_file").is_null())
                rc.train_file = resolve(base_dir, d.at("train_file").get<std::string>());
            if (d.contains("test_file") && !d.at("test_file").is_null())
                rc.test_file = resolve(base_dir, d.at("test_file").get<std::string>());
        }

        rc.train.seed = rc.seed;
        if (doc.contains("train")) parse_train(doc.at("train"), rc.train, rc);
        rc.train.seed = rc.seed;
        rc.train.validate();

        if (doc.contains("audit")) {
            const json& a = doc.at("audit");
            read_if(a, "tol", rc.violation_tol);
            read_if(a, "random_points", rc.random_audit_points);
        }
        if (doc.contains("localvol")) {
            const json& l = doc.at("localvol");
            if (l.contains("maturities")) rc.localvol_grid.maturities = parse_axis(l.at("maturities"), "localvol.maturities");
            if (l.contains("strikes")) rc.localvol_grid.strikes = parse_axis(l.at("strikes"), "localvol.strikes");
        }

        rc.mc.seed = rc.seed;
        if (doc.contains("backtest")) {
            const json& b = doc.at("backtest");
            read_if(b, "paths", rc.mc.n_paths);
            read_if(b, "steps", rc.mc.n_steps);
            read_if(b, "antithetic", rc.mc.antithetic);
            read_if(b, "source", rc.backtest_source);
            read_if(b, "quotes", rc.backtest_quotes);
            if (b.contains("grid_file") && !b.at("grid_file").is_null())
                rc.backtest_grid_file = resolve(base_dir, b.at("grid_file").get<std::string>());
        }
        rc.mc.validate();
        if (rc.backtest_source != "network" && rc.backtest_source != "truth" && rc.backtest_source != "grid") {
            throw std::invalid_argument("backtest.source must be network, truth or grid");
        }
        if (rc.backtest_quotes != "train" && rc.backtest_quotes != "test") {
            throw std::invalid_argument("backtest.quotes must be train or test");
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return rc;
}

std::string config_hash(const json& doc) {
    const std::string s = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lvnn::cli
