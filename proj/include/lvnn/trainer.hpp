#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lvnn/errors.hpp"
#include "lvnn/objective.hpp"

namespace lvnn {

// Appends (T = 0, k, (k - S0)^+) for every distinct strike lacking a T = 0 row.
std::vector<ForwardQuote> augment_with_payoffs(std::span<const ForwardQuote> quotes, double spot);
// Raw-quote variant: payoff rows use the listed strikes K (k = K at T = 0).
std::vector<MarketQuote> augment_with_payoffs(std::span<const MarketQuote> quotes, double spot);

enum class OptimizerKind { Adam, RMSProp, Nesterov };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
};

struct RmsPropState {
    double decay = 0.9;
    double eps = 1e-8;
    Eigen::VectorXd v;
};

// Sutskever form: the gradient passed to the step must be taken at the
// look-ahead point params + momentum * velocity.
struct NesterovState {
    double momentum = 0.9;
    Eigen::VectorXd velocity;
};

// Each step updates `params` in place. Empty moment vectors are treated as
// a fresh (zero) state; any other size mismatch throws std::invalid_argument.
void adam_step(AdamState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
void rmsprop_step(RmsPropState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
void nesterov_step(NesterovState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

class Optimizer {
public:
    explicit Optimizer(OptimizerKind kind) : kind_(kind) {}

    OptimizerKind kind() const { return kind_; }

    // Point at which the next gradient must be evaluated.
    Eigen::VectorXd evaluation_point(const Eigen::VectorXd& params) const;

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

private:
    OptimizerKind kind_;
    AdamState adam_;
    RmsPropState rms_;
    NesterovState nesterov_;
};

/**
 * Learning-rate plateau rule. An epoch improves when its loss beats the
 * reference best by more than `rel_tol` (relative). After `window`
 * consecutive non-improving epochs the rate is divided by `divisor` and the
 * window restarts.
 */
class PlateauSchedule {
public:
    PlateauSchedule(double lr0, int window, double divisor, double rel_tol = 1e-6);

    // Feeds one epoch's loss; returns true if the rate was just decayed.
    bool observe(double loss);

    double lr() const { return lr_; }
    double best() const { return best_; }

private:
    double lr_;
    int window_;
    double divisor_;
    double rel_tol_;
    double reference_ = std::numeric_limits<double>::infinity();
    double best_ = std::numeric_limits<double>::infinity();
    int stale_ = 0;
};

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    int max_epochs = 10000;
    int plateau_window = 100;
    double lr_divisor = 10.0;
    // Training stops once lr < min_lr; a non-positive value means lr0 * 1e-6.
    double min_lr = 0.0;
    double improvement_tol = 1e-6;
    std::uint64_t seed = 1;
    ArchitectureMode mode = ArchitectureMode::DenseSoft;
    Widths widths{200, 200};
    double init_scale = kDefaultInputScale;  // first-layer weight range at init
    PenaltyWeights lambda;
    HalfVarianceBand band;
    double guard = kDupireGuard;
    int threads = 1;
    // Leading epochs trained on the fit term alone. When the penalties switch
    // on, the schedule restarts at learning_rate and best-loss tracking
    // restarts; optimizer moments carry over.
    int penalty_warmup = 0;
    // Initial rate once the penalties are on; non-positive reuses learning_rate.
    double penalty_learning_rate = 0.0;

    void validate() const;
    double effective_min_lr() const { return min_lr > 0.0 ? min_lr : learning_rate * 1e-6; }
    double effective_penalty_lr() const {
        return penalty_warmup > 0 && penalty_learning_rate > 0.0 ? penalty_learning_rate : learning_rate;
    }
};

struct EpochRecord {
    int epoch = 0;
    LossBreakdown loss;
    double lr = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> history;
    std::vector<int> lr_decay_epochs;
    int best_epoch = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    int epochs_run = 0;
    int warmup_end = 0;  // last fit-only epoch, 0 without warmup
    std::string stop_reason;
    std::string checkpoint;  // path of the saved checkpoint, if any
    double wall_seconds = 0.0;

    nlohmann::json to_json() const;
    // CSV `epoch,fit,pen1,pen2,pen3,total,lr`.
    void write_history_csv(const std::filesystem::path& path) const;
};

class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, TrainReport report)
        : NumericalError(what), report_(std::move(report)) {}
    const TrainReport& report() const { return report_; }

private:
    TrainReport report_;
};

struct FitResult {
    NetParams params;  // parameters at the best training loss
    TrainReport report;
};

/**
 * Full-batch training. Every epoch evaluates the loss and its gradient over
 * all points, takes one optimizer step and projects the weights in
 * SparseHard mode. Returns the parameters that achieved the best loss.
 * Throws TrainingDiverged on a non-finite loss.
 */
FitResult fit(std::span<const TrainingPoint> points, const TrainConfig& config,
              ScaleFactors factors, std::vector<TrainingPoint> aux_sites = {});

// Same, starting from the supplied parameters instead of init_params.
FitResult fit_from(NetParams initial, std::span<const TrainingPoint> points,
                   const TrainConfig& config, ScaleFactors factors,
                   std::vector<TrainingPoint> aux_sites = {});

}  // namespace lvnn
