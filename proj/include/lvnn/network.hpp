#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lvnn {

// Scalar activation with its first three derivatives at one point.
struct ActivationJet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

// softplus(x) = ln(1 + e^x); stable for |x| well beyond 700.
double softplus(double x);
ActivationJet softplus_jet(double x);

// Logistic sigmoid 1 / (1 + e^-x).
double sigmoid(double x);
ActivationJet sigmoid_jet(double x);

enum class ArchitectureMode { DenseSoft, SparseSoft, SparseHard };

std::string_view to_string(ArchitectureMode mode);
// Accepts "dense-soft", "sparse-soft", "sparse-hard".
ArchitectureMode parse_mode(std::string_view name);

inline bool is_sparse(ArchitectureMode m) { return m != ArchitectureMode::DenseSoft; }

/**
 * Two-hidden-layer price surrogate F(T', k').
 *
 * w1 is always stored as width1 x 2. In sparse modes the first
 * t_units() rows form the maturity subnet (column 1 pinned to zero, sigmoid
 * activation) and the remaining rows form the strike subnet (column 0 pinned
 * to zero, softplus). Every other unit, including the output, is softplus.
 */
struct NetParams {
    ArchitectureMode mode = ArchitectureMode::DenseSoft;
    Eigen::MatrixXd w1;  // width1 x 2
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // width2 x width1
    Eigen::VectorXd b2;
    Eigen::MatrixXd w3;  // 1 x width2
    double b3 = 0.0;

    int width1() const { return static_cast<int>(w1.rows()); }
    int width2() const { return static_cast<int>(w2.rows()); }

    // Size of the maturity subnet (zero for dense networks).
    int t_units() const { return is_sparse(mode) ? width1() / 2 : 0; }

    // Number of trainable scalars (pinned cross-block entries excluded).
    std::size_t parameter_count() const;

    // Number of stored scalars, i.e. the length of flatten().
    std::size_t flat_size() const;

    // Throws std::invalid_argument if dimensions do not chain or a pinned
    // cross-block entry is nonzero.
    void validate() const;

    // Same shape, every entry zero.
    NetParams zeros_like() const;

    bool operator==(const NetParams&) const = default;
};

// Flat layout: w1 (row-major), b1, w2 (row-major), b2, w3, b3.
Eigen::VectorXd flatten(const NetParams& p);
void unflatten(const Eigen::VectorXd& flat, NetParams& p);

// True for flat entries that are genuine parameters (false for the pinned
// zero cross-block of a sparse first layer).
std::vector<bool> free_mask(const NetParams& p);

inline constexpr double kDefaultInputScale = 10.0;

struct Widths {
    int first = 200;
    int second = 200;
};

/**
 * Glorot-uniform weights for the hidden and output layers with zero biases.
 * Inputs live on the unit square, so the first layer instead draws weights
 * from U(-input_scale, input_scale) and places each unit's kink at a uniform
 * random point of the square (b = -w . c). Absolute values of all weights
 * are taken in SparseHard mode. Deterministic for a given seed.
 */
NetParams init_params(ArchitectureMode mode, Widths widths, std::uint64_t seed,
                      double input_scale = kDefaultInputScale);

// Clamps every weight to >= 0 in SparseHard mode; no-op otherwise.
NetParams project_weights(NetParams p);
void project_weights_inplace(NetParams& p);

// Network value and sensitivities with respect to the scaled inputs.
struct EvalResult {
    double value = 0.0;
    double dT = 0.0;
    double dk = 0.0;
    double dkk = 0.0;
};

double forward(const NetParams& p, double t_scaled, double k_scaled);
EvalResult forward_with_sensitivities(const NetParams& p, double t_scaled, double k_scaled);

// Column-batched variants; inputs are the scaled coordinates.
struct BatchEval {
    Eigen::VectorXd value;
    Eigen::VectorXd dT;
    Eigen::VectorXd dk;
    Eigen::VectorXd dkk;

    EvalResult at(Eigen::Index i) const { return {value[i], dT[i], dk[i], dkk[i]}; }
};

Eigen::VectorXd forward(const NetParams& p, std::span<const double> t_scaled,
                        std::span<const double> k_scaled);
BatchEval forward_with_sensitivities(const NetParams& p, std::span<const double> t_scaled,
                                     std::span<const double> k_scaled);

// First hidden layer outputs at one point (used to check subnet isolation).
Eigen::VectorXd first_layer_activations(const NetParams& p, double t_scaled, double k_scaled);

/**
 * Reverse pass through the sensitivity propagation.
 *
 * Given per-point adjoints of a scalar objective with respect to the network
 * value, dT and dkk, returns the gradient of that objective with respect to
 * every weight and bias (pinned entries receive exactly zero).
 */
NetParams backprop_sensitivities(const NetParams& p, std::span<const double> t_scaled,
                                 std::span<const double> k_scaled,
                                 std::span<const double> adj_value,
                                 std::span<const double> adj_dT,
                                 std::span<const double> adj_dkk);

}  // namespace lvnn
