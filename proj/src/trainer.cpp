#include "lvnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <stdexcept>

namespace lvnn {

std::vector<ForwardQuote> augment_with_payoffs(std::span<const ForwardQuote> quotes, double spot) {
    if (!(spot > 0.0)) throw std::invalid_argument("augment_with_payoffs: spot must be > 0");
    std::vector<ForwardQuote> out(quotes.begin(), quotes.end());
    std::set<double> strikes, have_payoff;
    for (const auto& q : quotes) {
        strikes.insert(q.fwd_strike);
        if (q.maturity == 0.0) have_payoff.insert(q.fwd_strike);
    }
    for (double k : strikes) {
        if (!have_payoff.contains(k)) out.push_back({0.0, k, std::max(k - spot, 0.0)});
    }
    return out;
}

std::vector<MarketQuote> augment_with_payoffs(std::span<const MarketQuote> quotes, double spot) {
    if (!(spot > 0.0)) throw std::invalid_argument("augment_with_payoffs: spot must be > 0");
    std::vector<MarketQuote> out(quotes.begin(), quotes.end());
    std::set<double> strikes, have_payoff;
    for (const auto& q : quotes) {
        strikes.insert(q.strike);
        if (q.maturity == 0.0) have_payoff.insert(q.strike);
    }
    for (double k : strikes) {
        if (!have_payoff.contains(k)) out.push_back({0.0, k, std::max(k - spot, 0.0)});
    }
    return out;
}

std::string_view to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::RMSProp: return "rmsprop";
        case OptimizerKind::Nesterov: return "nesterov";
    }
    return "unknown";
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "rmsprop") return OptimizerKind::RMSProp;
    if (name == "nesterov") return OptimizerKind::Nesterov;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                                "' (expected adam, rmsprop or nesterov)");
}

namespace {

void check_state(Eigen::VectorXd& state, const Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (grad.size() != params.size()) throw std::invalid_argument("optimizer: gradient shape mismatch");
    if (state.size() == 0) state = Eigen::VectorXd::Zero(params.size());
    if (state.size() != params.size()) throw std::invalid_argument("optimizer: state shape mismatch");
}

}  // namespace

void adam_step(AdamState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    check_state(s.m, params, grad);
    check_state(s.v, params, grad);
    ++s.step;
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

void rmsprop_step(RmsPropState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    check_state(s.v, params, grad);
    s.v = s.decay * s.v + (1.0 - s.decay) * grad.cwiseAbs2();
    params.array() -= lr * grad.array() / (s.v.array().sqrt() + s.eps);
}

void nesterov_step(NesterovState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    check_state(s.velocity, params, grad);
    s.velocity = s.momentum * s.velocity - lr * grad;
    params += s.velocity;
}

Eigen::VectorXd Optimizer::evaluation_point(const Eigen::VectorXd& params) const {
    if (kind_ == OptimizerKind::Nesterov && nesterov_.velocity.size() == params.size()) {
        return params + nesterov_.momentum * nesterov_.velocity;
    }
    return params;
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    switch (kind_) {
        case OptimizerKind::Adam: adam_step(adam_, params, grad, lr); break;
        case OptimizerKind::RMSProp: rmsprop_step(rms_, params, grad, lr); break;
        case OptimizerKind::Nesterov: nesterov_step(nesterov_, params, grad, lr); break;
    }
}

PlateauSchedule::PlateauSchedule(double lr0, int window, double divisor, double rel_tol)
    : lr_(lr0), window_(window), divisor_(divisor), rel_tol_(rel_tol) {
    if (!(lr0 > 0.0)) throw std::invalid_argument("PlateauSchedule: lr must be > 0");
    if (window < 1) throw std::invalid_argument("PlateauSchedule: window must be >= 1");
    if (!(divisor > 1.0)) throw std::invalid_argument("PlateauSchedule: divisor must be > 1");
}

bool PlateauSchedule::observe(double loss) {
    best_ = std::min(best_, loss);
    if (loss < reference_ - rel_tol_ * std::abs(reference_) || !std::isfinite(reference_)) {
        reference_ = loss;
        stale_ = 0;
        return false;
    }
    if (++stale_ >= window_) {
        lr_ /= divisor_;
        stale_ = 0;
        return true;
    }
    return false;
}

void TrainConfig::validate() const {
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (plateau_window < 1) throw std::invalid_argument("TrainConfig: plateau_window must be >= 1");
    if (!(lr_divisor > 1.0)) throw std::invalid_argument("TrainConfig: lr_divisor must be > 1");
    if (!(init_scale > 0.0)) throw std::invalid_argument("TrainConfig: init_scale must be > 0");
    if (penalty_warmup < 0) throw std::invalid_argument("TrainConfig: penalty_warmup must be >= 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (widths.first < 1 || widths.second < 1) throw std::invalid_argument("TrainConfig: widths must be >= 1");
    lambda.validate();
    band.validate();
}

nlohmann::json TrainReport::to_json() const {
    nlohmann::json j;
    j["epochs_run"] = epochs_run;
    j["best_epoch"] = best_epoch;
    j["best_loss"] = best_loss;
    j["stop_reason"] = stop_reason;
    j["warmup_end"] = warmup_end;
    j["lr_decay_epochs"] = lr_decay_epochs;
    j["checkpoint"] = checkpoint;
    j["wall_seconds"] = wall_seconds;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& r : history) {
        hist.push_back({{"epoch", r.epoch},
                        {"fit", r.loss.fit_l1},
                        {"pen_calendar", r.loss.pen_calendar},
                        {"pen_butterfly", r.loss.pen_butterfly},
                        {"pen_dupire", r.loss.pen_dupire},
                        {"total", r.loss.total},
                        {"guard_hits", r.loss.guard_hits},
                        {"lr", r.lr}});
    }
    j["history"] = std::move(hist);
    return j;
}

void TrainReport::write_history_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17);
    out << "epoch,fit,pen1,pen2,pen3,total,lr\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << r.loss.fit_l1 << ',' << r.loss.pen_calendar << ','
            << r.loss.pen_butterfly << ',' << r.loss.pen_dupire << ',' << r.loss.total << ','
            << r.lr << '\n';
    }
}

FitResult fit_from(NetParams initial, std::span<const TrainingPoint> points,
                   const TrainConfig& config, ScaleFactors factors,
                   std::vector<TrainingPoint> aux_sites) {
    if (points.empty()) throw std::invalid_argument("fit: empty training set");
    config.validate();
    initial.validate();
    const auto started = std::chrono::steady_clock::now();

    ObjectiveConfig obj;
    const int warmup = std::min(config.penalty_warmup, config.max_epochs - 1);
    obj.lambda = warmup > 0 ? PenaltyWeights{0.0, 0.0, 0.0} : config.lambda;
    obj.band = config.band;
    obj.factors = factors;
    obj.guard = config.guard;
    obj.aux_sites = std::move(aux_sites);
    obj.threads = config.threads;

    NetParams current = std::move(initial);
    project_weights_inplace(current);
    NetParams probe = current;
    Eigen::VectorXd flat = flatten(current);

    Optimizer opt(config.optimizer);
    PlateauSchedule schedule(config.learning_rate, config.plateau_window, config.lr_divisor,
                             config.improvement_tol);
    FitResult result;
    TrainReport& rep = result.report;
    result.params = current;
    const double min_lr = config.effective_min_lr();
    rep.stop_reason = "max_epochs";

    bool warming = warmup > 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        if (warming && (epoch > warmup || schedule.lr() < min_lr)) {
            warming = false;
            obj.lambda = config.lambda;
            schedule = PlateauSchedule(config.effective_penalty_lr(), config.plateau_window, config.lr_divisor,
                                       config.improvement_tol);
            rep.best_loss = std::numeric_limits<double>::infinity();
            rep.warmup_end = epoch - 1;
        }
        const double lr = schedule.lr();
        Eigen::VectorXd at = opt.evaluation_point(flat);
        unflatten(at, probe);
        project_weights_inplace(probe);
        LossAndGradient lg = loss_and_gradient(probe, points, obj);
        rep.history.push_back({epoch, lg.loss, lr});
        rep.epochs_run = epoch;
        if (!std::isfinite(lg.loss.total)) {
            rep.stop_reason = "diverged";
            rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                   " (non-finite loss)", rep);
        }
        if (lg.loss.total < rep.best_loss) {
            rep.best_loss = lg.loss.total;
            rep.best_epoch = epoch;
            result.params = probe;
        }
        if (schedule.observe(lg.loss.total)) rep.lr_decay_epochs.push_back(epoch);

        opt.step(flat, flatten(lg.gradient), lr);
        unflatten(flat, current);
        if (current.mode == ArchitectureMode::SparseHard) {
            project_weights_inplace(current);
            flat = flatten(current);
        }
        if (!warming && schedule.lr() < min_lr) {
            rep.stop_reason = "min_lr";
            break;
        }
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

FitResult fit(std::span<const TrainingPoint> points, const TrainConfig& config,
              ScaleFactors factors, std::vector<TrainingPoint> aux_sites) {
    config.validate();
    return fit_from(init_params(config.mode, config.widths, config.seed, config.init_scale), points, config, factors,
                    std::move(aux_sites));
}

}  // namespace lvnn
