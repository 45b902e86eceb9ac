#include "lvnn/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace lvnn {

// max(x, 0) + log1p(exp(-|x|)) never overflows and equals log1p(exp(x)).
double softplus(double x) {
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

// p = sigmoid(x), q = sigmoid(-x) = 1 - p, both without cancellation.
inline void logistic_pair(double x, double& p, double& q) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
    } else {
        const double e = std::exp(x);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
    }
}

}  // namespace

ActivationJet softplus_jet(double x) {
    // One exponential serves the value and the logistic derivatives.
    const double e = std::exp(-std::abs(x));
    const double inv = 1.0 / (1.0 + e);
    const double p = x >= 0.0 ? inv : e * inv;
    const double q = x >= 0.0 ? e * inv : inv;
    const double pq = p * q;
    return {(x > 0.0 ? x : 0.0) + std::log1p(e), p, pq, pq * (q - p)};
}

ActivationJet sigmoid_jet(double x) {
    double p, q;
    logistic_pair(x, p, q);
    const double pq = p * q;
    return {p, pq, pq * (q - p), pq * (1.0 - 6.0 * pq)};
}

std::string_view to_string(ArchitectureMode mode) {
    switch (mode) {
        case ArchitectureMode::DenseSoft: return "dense-soft";
        case ArchitectureMode::SparseSoft: return "sparse-soft";
        case ArchitectureMode::SparseHard: return "sparse-hard";
    }
    return "unknown";
}

ArchitectureMode parse_mode(std::string_view name) {
    if (name == "dense-soft") return ArchitectureMode::DenseSoft;
    if (name == "sparse-soft") return ArchitectureMode::SparseSoft;
    if (name == "sparse-hard") return ArchitectureMode::SparseHard;
    throw std::invalid_argument("unknown architecture mode '" + std::string(name) +
                                "' (expected dense-soft, sparse-soft or sparse-hard)");
}

std::size_t NetParams::flat_size() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1);
}

std::size_t NetParams::parameter_count() const {
    std::size_t n = flat_size();
    // Each sparse first-layer unit keeps one of its two input weights.
    if (is_sparse(mode)) n -= static_cast<std::size_t>(width1());
    return n;
}

void NetParams::validate() const {
    if (w1.rows() < 1 || w1.cols() != 2) throw std::invalid_argument("NetParams: w1 must be width1 x 2");
    if (b1.size() != w1.rows()) throw std::invalid_argument("NetParams: b1 size mismatch");
    if (w2.rows() < 1 || w2.cols() != w1.rows()) throw std::invalid_argument("NetParams: w2 shape mismatch");
    if (b2.size() != w2.rows()) throw std::invalid_argument("NetParams: b2 size mismatch");
    if (w3.rows() != 1 || w3.cols() != w2.rows()) throw std::invalid_argument("NetParams: w3 shape mismatch");
    if (is_sparse(mode)) {
        if (width1() < 2) throw std::invalid_argument("NetParams: sparse first layer needs >= 2 units");
        const int nt = t_units();
        for (int i = 0; i < width1(); ++i) {
            const int pinned = i < nt ? 1 : 0;
            if (w1(i, pinned) != 0.0) {
                throw std::invalid_argument("NetParams: sparse cross-block weight must be zero");
            }
        }
    }
}

NetParams NetParams::zeros_like() const {
    NetParams z;
    z.mode = mode;
    z.w1 = Eigen::MatrixXd::Zero(w1.rows(), w1.cols());
    z.b1 = Eigen::VectorXd::Zero(b1.size());
    z.w2 = Eigen::MatrixXd::Zero(w2.rows(), w2.cols());
    z.b2 = Eigen::VectorXd::Zero(b2.size());
    z.w3 = Eigen::MatrixXd::Zero(w3.rows(), w3.cols());
    z.b3 = 0.0;
    return z;
}

namespace {

template <typename Fn>
void for_each_block(NetParams& p, Fn&& fn) {
    // Row-major traversal of the matrices keeps the flat layout independent
    // of Eigen's column-major storage.
    auto visit_matrix = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) fn(m(r, c));
    };
    auto visit_vector = [&](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) fn(v[i]);
    };
    visit_matrix(p.w1);
    visit_vector(p.b1);
    visit_matrix(p.w2);
    visit_vector(p.b2);
    visit_matrix(p.w3);
    fn(p.b3);
}

}  // namespace

Eigen::VectorXd flatten(const NetParams& p) {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(p.flat_size()));
    Eigen::Index i = 0;
    for_each_block(const_cast<NetParams&>(p), [&](double& v) { flat[i++] = v; });
    return flat;
}

void unflatten(const Eigen::VectorXd& flat, NetParams& p) {
    if (static_cast<std::size_t>(flat.size()) != p.flat_size()) {
        throw std::invalid_argument("unflatten: size mismatch");
    }
    Eigen::Index i = 0;
    for_each_block(p, [&](double& v) { v = flat[i++]; });
}

std::vector<bool> free_mask(const NetParams& p) {
    std::vector<bool> mask(p.flat_size(), true);
    if (is_sparse(p.mode)) {
        const int nt = p.t_units();
        for (int r = 0; r < p.width1(); ++r) {
            const int pinned = r < nt ? 1 : 0;
            mask[static_cast<std::size_t>(2 * r + pinned)] = false;
        }
    }
    return mask;
}

NetParams init_params(ArchitectureMode mode, Widths widths, std::uint64_t seed, double input_scale) {
    if (widths.first < 1 || widths.second < 1) {
        throw std::invalid_argument("init_params: layer widths must be >= 1");
    }
    if (is_sparse(mode) && widths.first < 2) {
        throw std::invalid_argument("init_params: sparse first layer needs >= 2 units");
    }
    if (!(input_scale > 0.0)) throw std::invalid_argument("init_params: input_scale must be > 0");
    std::mt19937_64 rng(seed);
    auto uniform_matrix = [&](Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
        return m;
    };

    NetParams p;
    p.mode = mode;
    const int h1 = widths.first;
    const int h2 = widths.second;
    std::uniform_real_distribution<double> first(-input_scale, input_scale);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    p.w1 = Eigen::MatrixXd::Zero(h1, 2);
    p.b1 = Eigen::VectorXd::Zero(h1);
    const int nt = is_sparse(mode) ? h1 / 2 : 0;
    for (int r = 0; r < h1; ++r) {
        // Sparse subnets see one input each: T for the first nt rows, k after.
        const bool use_t = !is_sparse(mode) || r < nt;
        const bool use_k = !is_sparse(mode) || r >= nt;
        const double wt = use_t ? first(rng) : 0.0;
        const double wk = use_k ? first(rng) : 0.0;
        p.w1(r, 0) = mode == ArchitectureMode::SparseHard ? std::abs(wt) : wt;
        p.w1(r, 1) = mode == ArchitectureMode::SparseHard ? std::abs(wk) : wk;
        p.b1(r) = -(p.w1(r, 0) * unit(rng) + p.w1(r, 1) * unit(rng));
    }
    p.w2 = uniform_matrix(h2, h1, h1, h2);
    p.b2 = Eigen::VectorXd::Zero(h2);
    p.w3 = uniform_matrix(1, h2, h2, 1);
    p.b3 = 0.0;
    if (mode == ArchitectureMode::SparseHard) {
        p.w2 = p.w2.cwiseAbs();
        p.w3 = p.w3.cwiseAbs();
    }
    return p;
}

void project_weights_inplace(NetParams& p) {
    if (p.mode != ArchitectureMode::SparseHard) return;
    p.w1 = p.w1.cwiseMax(0.0);
    p.w2 = p.w2.cwiseMax(0.0);
    p.w3 = p.w3.cwiseMax(0.0);
}

NetParams project_weights(NetParams p) {
    project_weights_inplace(p);
    return p;
}

namespace {

// One semi-affine layer applied to a stacked input [a | t | g | s], where
// t, g, s are the input's first T-, first k- and second k-sensitivities.
// The first `sigmoid_rows` units use the sigmoid, the rest softplus.
struct LayerCache {
    Eigen::MatrixXd input;  // fan_in x 4n
    Eigen::MatrixXd z;      // fan_out x 4n, pre-activations [z | zt | zg | zs]
    Eigen::MatrixXd d1, d2, d3;  // activation derivatives at z (fan_out x n)
};

Eigen::MatrixXd apply_layer(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, int sigmoid_rows,
                            Eigen::MatrixXd input, Eigen::Index n, LayerCache* cache) {
    Eigen::MatrixXd z = w * input;
    z.leftCols(n).colwise() += b;

    const Eigen::Index m = w.rows();
    Eigen::MatrixXd out(m, 4 * n);
    Eigen::MatrixXd d1(m, n), d2(m, n), d3(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index r = 0; r < m; ++r) {
            const ActivationJet a = r < sigmoid_rows ? sigmoid_jet(z(r, j)) : softplus_jet(z(r, j));
            const double zt = z(r, n + j);
            const double zg = z(r, 2 * n + j);
            const double zs = z(r, 3 * n + j);
            out(r, j) = a.value;
            out(r, n + j) = a.d1 * zt;
            out(r, 2 * n + j) = a.d1 * zg;
            out(r, 3 * n + j) = a.d2 * zg * zg + a.d1 * zs;
            d1(r, j) = a.d1;
            d2(r, j) = a.d2;
            d3(r, j) = a.d3;
        }
    }
    if (cache != nullptr) {
        cache->input = std::move(input);
        cache->z = std::move(z);
        cache->d1 = std::move(d1);
        cache->d2 = std::move(d2);
        cache->d3 = std::move(d3);
    }
    return out;
}

// Adjoint of apply_layer. `bar_out` holds adjoints of [a' | t' | g' | s'].
// Returns adjoints of the stacked pre-activations [z | zt | zg | zs].
Eigen::MatrixXd layer_adjoint(const LayerCache& c, const Eigen::MatrixXd& bar_out, Eigen::Index n) {
    const Eigen::Index m = c.z.rows();
    Eigen::MatrixXd bar_z(m, 4 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index r = 0; r < m; ++r) {
            const double zt = c.z(r, n + j);
            const double zg = c.z(r, 2 * n + j);
            const double zs = c.z(r, 3 * n + j);
            const double ba = bar_out(r, j);
            const double bt = bar_out(r, n + j);
            const double bg = bar_out(r, 2 * n + j);
            const double bs = bar_out(r, 3 * n + j);
            const double d1 = c.d1(r, j), d2 = c.d2(r, j), d3 = c.d3(r, j);
            bar_z(r, j) = ba * d1 + bt * d2 * zt + bg * d2 * zg + bs * (d3 * zg * zg + d2 * zs);
            bar_z(r, n + j) = bt * d1;
            bar_z(r, 2 * n + j) = bg * d1 + bs * 2.0 * d2 * zg;
            bar_z(r, 3 * n + j) = bs * d1;
        }
    }
    return bar_z;
}

Eigen::MatrixXd input_stack(std::span<const double> t_scaled, std::span<const double> k_scaled) {
    if (t_scaled.size() != k_scaled.size()) {
        throw std::invalid_argument("network: input coordinate arrays differ in length");
    }
    const auto n = static_cast<Eigen::Index>(t_scaled.size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 4 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        x(0, j) = t_scaled[static_cast<std::size_t>(j)];
        x(1, j) = k_scaled[static_cast<std::size_t>(j)];
        x(0, n + j) = 1.0;      // dT'/dT'
        x(1, 2 * n + j) = 1.0;  // dk'/dk'
    }
    return x;
}

struct Trace {
    LayerCache l1, l2, l3;
    Eigen::MatrixXd out;  // 1 x 4n
};

Eigen::MatrixXd run(const NetParams& p, std::span<const double> t_scaled,
                    std::span<const double> k_scaled, Trace* trace) {
    const auto n = static_cast<Eigen::Index>(t_scaled.size());
    Eigen::MatrixXd x = input_stack(t_scaled, k_scaled);
    Eigen::VectorXd b3(1);
    b3[0] = p.b3;
    Eigen::MatrixXd h1 = apply_layer(p.w1, p.b1, p.t_units(), std::move(x), n,
                                     trace ? &trace->l1 : nullptr);
    Eigen::MatrixXd h2 = apply_layer(p.w2, p.b2, 0, std::move(h1), n, trace ? &trace->l2 : nullptr);
    return apply_layer(p.w3, b3, 0, std::move(h2), n, trace ? &trace->l3 : nullptr);
}

}  // namespace

Eigen::VectorXd forward(const NetParams& p, std::span<const double> t_scaled,
                        std::span<const double> k_scaled) {
    const auto n = static_cast<Eigen::Index>(t_scaled.size());
    Eigen::MatrixXd out = run(p, t_scaled, k_scaled, nullptr);
    return out.row(0).head(n).transpose();
}

BatchEval forward_with_sensitivities(const NetParams& p, std::span<const double> t_scaled,
                                     std::span<const double> k_scaled) {
    const auto n = static_cast<Eigen::Index>(t_scaled.size());
    Eigen::MatrixXd out = run(p, t_scaled, k_scaled, nullptr);
    BatchEval e;
    e.value = out.row(0).segment(0, n).transpose();
    e.dT = out.row(0).segment(n, n).transpose();
    e.dk = out.row(0).segment(2 * n, n).transpose();
    e.dkk = out.row(0).segment(3 * n, n).transpose();
    return e;
}

double forward(const NetParams& p, double t_scaled, double k_scaled) {
    const double t[1] = {t_scaled};
    const double k[1] = {k_scaled};
    return forward(p, t, k)[0];
}

EvalResult forward_with_sensitivities(const NetParams& p, double t_scaled, double k_scaled) {
    const double t[1] = {t_scaled};
    const double k[1] = {k_scaled};
    return forward_with_sensitivities(p, t, k).at(0);
}

Eigen::VectorXd first_layer_activations(const NetParams& p, double t_scaled, double k_scaled) {
    const double t[1] = {t_scaled};
    const double k[1] = {k_scaled};
    Eigen::MatrixXd h1 = apply_layer(p.w1, p.b1, p.t_units(), input_stack(t, k), 1, nullptr);
    return h1.col(0);
}

NetParams backprop_sensitivities(const NetParams& p, std::span<const double> t_scaled,
                                 std::span<const double> k_scaled,
                                 std::span<const double> adj_value,
                                 std::span<const double> adj_dT,
                                 std::span<const double> adj_dkk) {
    const auto n = static_cast<Eigen::Index>(t_scaled.size());
    if (adj_value.size() != t_scaled.size() || adj_dT.size() != t_scaled.size() ||
        adj_dkk.size() != t_scaled.size()) {
        throw std::invalid_argument("backprop_sensitivities: adjoint arrays differ in length");
    }
    Trace tr;
    run(p, t_scaled, k_scaled, &tr);

    Eigen::MatrixXd bar_out = Eigen::MatrixXd::Zero(1, 4 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto s = static_cast<std::size_t>(j);
        bar_out(0, j) = adj_value[s];
        bar_out(0, n + j) = adj_dT[s];
        bar_out(0, 3 * n + j) = adj_dkk[s];
    }

    NetParams g = p.zeros_like();

    // Weight adjoints pair each pre-activation block with its input block,
    // which is exactly bar_z * input^T over the stacked columns.
    Eigen::MatrixXd bar_z3 = layer_adjoint(tr.l3, bar_out, n);
    g.w3 = bar_z3 * tr.l3.input.transpose();
    g.b3 = bar_z3.leftCols(n).sum();

    Eigen::MatrixXd bar_h2 = p.w3.transpose() * bar_z3;
    Eigen::MatrixXd bar_z2 = layer_adjoint(tr.l2, bar_h2, n);
    g.w2.noalias() = bar_z2 * tr.l2.input.transpose();
    g.b2 = bar_z2.leftCols(n).rowwise().sum();

    Eigen::MatrixXd bar_h1 = p.w2.transpose() * bar_z2;
    Eigen::MatrixXd bar_z1 = layer_adjoint(tr.l1, bar_h1, n);
    g.w1 = bar_z1 * tr.l1.input.transpose();
    g.b1 = bar_z1.leftCols(n).rowwise().sum();

    if (is_sparse(p.mode)) {
        const int nt = p.t_units();
        for (int r = 0; r < p.width1(); ++r) g.w1(r, r < nt ? 1 : 0) = 0.0;
    }
    return g;
}

}  // namespace lvnn
