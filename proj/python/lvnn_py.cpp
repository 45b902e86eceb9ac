// Python bindings: pricers, chain generation, calibration, audits,
// local-vol extraction, Monte Carlo backtests and the CLI commands.

#include <array>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "lvnn/audit.hpp"
#include "lvnn/backtest.hpp"
#include "lvnn/checkpoint.hpp"
#include "lvnn/cli/commands.hpp"
#include "lvnn/cli/run_config.hpp"
#include "lvnn/pricers.hpp"
#include "lvnn/trainer.hpp"

namespace py = pybind11;
using namespace lvnn;

namespace {

using QuoteArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<MarketQuote> to_quotes(const QuoteArray& a) {
    std::vector<MarketQuote> out;
    out.reserve(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) out.push_back({a(i, 0), a(i, 1), a(i, 2)});
    return out;
}

QuoteArray from_quotes(const std::vector<MarketQuote>& q) {
    QuoteArray a(static_cast<Eigen::Index>(q.size()), 3);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = q[i].maturity;
        a(r, 1) = q[i].strike;
        a(r, 2) = q[i].price;
    }
    return a;
}

nlohmann::json to_json(const py::object& obj) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

struct Calibrated {
    NetParams params;
    ScalingBox box;
    TrainReport report;
};

}  // namespace

PYBIND11_MODULE(lvnn, m) {
    m.doc() = "Neural local-volatility calibration toolkit";

    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<TermStructure>(m, "TermStructure")
        .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("knot_times"), py::arg("values"))
        .def_static("flat", &TermStructure::flat, py::arg("value"))
        .def("integrate", &TermStructure::integrate, py::arg("t0"), py::arg("t1"));

    py::class_<ScalingBox>(m, "ScalingBox")
        .def(py::init<double, double, double, double>(), py::arg("t_min"), py::arg("t_max"), py::arg("k_min"),
             py::arg("k_max"))
        .def_readonly("t_min", &ScalingBox::t_min)
        .def_readonly("t_max", &ScalingBox::t_max)
        .def_readonly("k_min", &ScalingBox::k_min)
        .def_readonly("k_max", &ScalingBox::k_max)
        .def("scale", &ScalingBox::scale, py::arg("maturity"), py::arg("fwd_strike"))
        .def("unscale", &ScalingBox::unscale, py::arg("t_scaled"), py::arg("k_scaled"));

    py::class_<LocalVolFn>(m, "LocalVol")
        .def_static("flat", &flat_local_vol, py::arg("sigma"))
        .def_static("smile", &smile_local_vol, py::arg("spot"), py::arg("base") = 0.2, py::arg("curvature") = 0.003,
                    py::arg("lo") = 0.05, py::arg("hi") = 0.4)
        .def("__call__", &LocalVolFn::operator(), py::arg("t"), py::arg("spot"));

    m.def("norm_cdf", &norm_cdf, py::arg("x"));
    m.def("bs_put", &bs_put, py::arg("spot"), py::arg("strike"), py::arg("maturity"), py::arg("rate"),
          py::arg("dividend"), py::arg("sigma"));
    m.def("implied_vol", &implied_vol, py::arg("price"), py::arg("spot"), py::arg("strike"), py::arg("maturity"),
          py::arg("rate"), py::arg("dividend"));
    m.def("trinomial_put", &trinomial_put, py::arg("vol"), py::arg("spot"), py::arg("strike"), py::arg("maturity"),
          py::arg("rate"), py::arg("dividend"), py::arg("steps") = 200);

    m.def(
        "generate_chain",
        [](std::vector<double> maturities, std::vector<double> strikes, const LocalVolFn& vol, double spot,
           const TermStructure& rate, const TermStructure& dividend, int tree_steps, double noise,
           std::uint64_t seed) {
            SyntheticChainSpec s;
            s.spot = spot;
            s.maturities = std::move(maturities);
            s.strikes = std::move(strikes);
            s.vol = vol;
            s.rate = rate;
            s.dividend = dividend;
            s.tree_steps = tree_steps;
            s.noise_scale = noise;
            s.noise_seed = seed;
            return from_quotes(generate_chain(s));
        },
        py::arg("maturities"), py::arg("strikes"), py::arg("vol"), py::arg("spot") = 100.0,
        py::arg("rate") = TermStructure::flat(0.0), py::arg("dividend") = TermStructure::flat(0.0),
        py::arg("tree_steps") = 200, py::arg("noise") = 0.0, py::arg("seed") = 0,
        "Tree-priced put chain as an (n, 3) array of (T, K, price), maturity-major.");

    py::class_<NetParams>(m, "Network")
        .def(py::init([](const std::string& mode, std::pair<int, int> widths, std::uint64_t seed, double scale) {
                 return init_params(parse_mode(mode), {widths.first, widths.second}, seed, scale);
             }),
             py::arg("mode") = "dense-soft", py::arg("widths") = std::pair<int, int>{200, 200}, py::arg("seed") = 1,
             py::arg("input_scale") = kDefaultInputScale)
        .def_property_readonly("mode", [](const NetParams& p) { return std::string(to_string(p.mode)); })
        .def_property_readonly("widths", [](const NetParams& p) { return std::pair{p.width1(), p.width2()}; })
        .def("parameter_count", &NetParams::parameter_count)
        .def("flatten", [](const NetParams& p) { return flatten(p); })
        .def(
            "forward",
            [](const NetParams& p, std::vector<double> t, std::vector<double> k) { return forward(p, t, k); },
            py::arg("t_scaled"), py::arg("k_scaled"))
        .def(
            "sensitivities",
            [](const NetParams& p, std::vector<double> t, std::vector<double> k) {
                const BatchEval e = forward_with_sensitivities(p, t, k);
                py::dict d;
                d["value"] = e.value;
                d["dT"] = e.dT;
                d["dk"] = e.dk;
                d["dkk"] = e.dkk;
                return d;
            },
            py::arg("t_scaled"), py::arg("k_scaled"));

    m.def(
        "load_checkpoint",
        [](const std::filesystem::path& path) {
            const Checkpoint c = load_checkpoint(path);
            return py::make_tuple(c.params, c.box ? py::cast(*c.box) : py::none());
        },
        py::arg("path"), "Returns (network, scaling box or None).");
    m.def(
        "save_checkpoint",
        [](const std::filesystem::path& path, const NetParams& p, const ScalingBox& box) {
            save_checkpoint(path, {p, box});
        },
        py::arg("path"), py::arg("network"), py::arg("box"));

    py::class_<Calibrated>(m, "Calibration")
        .def_readonly("network", &Calibrated::params)
        .def_readonly("box", &Calibrated::box)
        .def_property_readonly("report", [](const Calibrated& c) { return from_json(c.report.to_json()); })
        .def_property_readonly("best_loss", [](const Calibrated& c) { return c.report.best_loss; });

    m.def(
        "calibrate",
        [](const QuoteArray& quotes, double spot, const TermStructure& rate, const TermStructure& dividend,
           const std::string& mode, std::pair<int, int> widths, int epochs, double learning_rate,
           std::array<double, 3> lambda, const std::string& optimizer, std::uint64_t seed, int penalty_warmup,
           double penalty_learning_rate, double guard) {
            const auto raw = to_quotes(quotes);
            const auto aug = augment_with_payoffs(std::span<const MarketQuote>(raw), spot);
            const auto fwd = to_forward(aug, rate, dividend);
            Calibrated c;
            c.box = fit_scaling(fwd);
            const auto points = make_training_points(fwd, c.box);
            TrainConfig tc;
            tc.mode = parse_mode(mode);
            tc.widths = {widths.first, widths.second};
            tc.max_epochs = epochs;
            tc.learning_rate = learning_rate;
            tc.lambda = {lambda[0], lambda[1], lambda[2]};
            tc.optimizer = parse_optimizer(optimizer);
            tc.seed = seed;
            tc.penalty_warmup = penalty_warmup;
            tc.penalty_learning_rate = penalty_learning_rate;
            tc.guard = guard;
            FitResult fr;
            {
                py::gil_scoped_release release;
                fr = fit(points, tc, derivative_scale_factors(c.box));
            }
            c.params = std::move(fr.params);
            c.report = std::move(fr.report);
            return c;
        },
        py::arg("quotes"), py::arg("spot") = 100.0, py::arg("rate") = TermStructure::flat(0.0),
        py::arg("dividend") = TermStructure::flat(0.0), py::arg("mode") = "dense-soft",
        py::arg("widths") = std::pair<int, int>{200, 200}, py::arg("epochs") = 10000,
        py::arg("learning_rate") = 1e-3, py::arg("penalty") = std::array<double, 3>{0.0, 0.0, 0.0},
        py::arg("optimizer") = "adam", py::arg("seed") = 1, py::arg("penalty_warmup") = 0,
        py::arg("penalty_learning_rate") = 0.0, py::arg("guard") = kDupireGuard,
        "Fits the price network to an (n, 3) quote array after payoff augmentation.");

    m.def(
        "predict_prices",
        [](const NetParams& p, const ScalingBox& box, const QuoteArray& quotes, const TermStructure& rate,
           const TermStructure& dividend) {
            const auto v = predict_prices(p, to_quotes(quotes), box, rate, dividend);
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        },
        py::arg("network"), py::arg("box"), py::arg("quotes"), py::arg("rate") = TermStructure::flat(0.0),
        py::arg("dividend") = TermStructure::flat(0.0));

    m.def(
        "count_violations",
        [](const NetParams& p, const ScalingBox& box, std::vector<double> maturities,
           std::vector<double> fwd_strikes, double tol) {
            return from_json(count_violations(p, maturities, fwd_strikes, box, tol).to_json());
        },
        py::arg("network"), py::arg("box"), py::arg("maturities"), py::arg("fwd_strikes"),
        py::arg("tol") = kViolationTol);

    m.def(
        "extract_local_vol",
        [](const NetParams& p, const ScalingBox& box, std::vector<double> maturities, std::vector<double> strikes,
           const TermStructure& rate, const TermStructure& dividend, double guard) {
            const SurfaceGrid g = extract_local_vol(p, std::move(maturities), std::move(strikes), box, rate,
                                                    dividend, guard);
            return py::make_tuple(g.values, g.flags);
        },
        py::arg("network"), py::arg("box"), py::arg("maturities"), py::arg("strikes"),
        py::arg("rate") = TermStructure::flat(0.0), py::arg("dividend") = TermStructure::flat(0.0),
        py::arg("guard") = kDupireGuard, "Returns (values, flags); invalid cells hold NaN.");

    m.def(
        "backtest",
        [](py::object source, const QuoteArray& quotes, double spot, const TermStructure& rate,
           const TermStructure& dividend, long paths, int steps, std::uint64_t seed, bool antithetic,
           double guard) {
            VolSource src;
            if (py::isinstance<LocalVolFn>(source)) {
                src = source.cast<LocalVolFn>();
            } else {
                const auto pair = source.cast<std::pair<NetParams, ScalingBox>>();
                NetworkVolSource n{pair.first, pair.second};
                n.guard = guard;
                src = std::move(n);
            }
            McConfig mc;
            mc.n_paths = paths;
            mc.n_steps = steps;
            mc.seed = seed;
            mc.antithetic = antithetic;
            const auto q = to_quotes(quotes);
            BacktestResult r;
            {
                py::gil_scoped_release release;
                r = backtest_rmse(src, q, spot, rate, dividend, mc);
            }
            return from_json(r.to_json());
        },
        py::arg("source"), py::arg("quotes"), py::arg("spot") = 100.0, py::arg("rate") = TermStructure::flat(0.0),
        py::arg("dividend") = TermStructure::flat(0.0), py::arg("paths") = 100000, py::arg("steps") = 100,
        py::arg("seed") = 1, py::arg("antithetic") = false, py::arg("guard") = kDupireGuard,
        "Monte Carlo repricing RMSE. `source` is a LocalVol or a (network, box) pair.");

    m.def(
        "run",
        [](const std::string& command, const py::object& config, bool force,
           std::optional<std::filesystem::path> checkpoint, std::optional<std::filesystem::path> quotes) {
            const cli::RunConfig cfg = cli::parse_run_config(to_json(config));
            cli::CommandOptions opts;
            opts.force = force;
            opts.checkpoint = std::move(checkpoint);
            opts.quotes = std::move(quotes);
            std::ostringstream log, err;
            const int code = cli::run_command(command, cfg, opts, log, err);
            return py::make_tuple(code, log.str() + err.str());
        },
        py::arg("command"), py::arg("config"), py::arg("force") = false, py::arg("checkpoint") = py::none(),
        py::arg("quotes") = py::none(), "Runs an lvcal command; returns (exit code, log text).");
}
