#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "lvnn/network.hpp"

namespace testutil {

// Relative comparison with an absolute floor for values near zero.
inline bool close_rel(double a, double b, double rel, double abs_floor) {
    const double diff = std::abs(a - b);
    return diff <= abs_floor || diff <= rel * std::max(std::abs(a), std::abs(b));
}

// Richardson-extrapolated central differences: O(h^4) truncation error.
template <typename F>
double d1(F&& f, double x, double h) {
    auto c = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
    return (4.0 * c(h / 2) - c(h)) / 3.0;
}

template <typename F>
double d2(F&& f, double x, double h) {
    const double fx = f(x);
    auto c = [&](double s) { return (f(x + s) - 2.0 * fx + f(x - s)) / (s * s); };
    return (4.0 * c(h / 2) - c(h)) / 3.0;
}

// Random network with every entry perturbed so biases and the output layer
// are not at their zero init.
inline lvnn::NetParams random_net(lvnn::ArchitectureMode mode, int w1, int w2, std::uint64_t seed,
                                  double input_scale = 3.0) {
    lvnn::NetParams p = lvnn::init_params(mode, {w1, w2}, seed, input_scale);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2[i] += u(rng);
    for (Eigen::Index i = 0; i < p.w3.size(); ++i) p.w3(i) += 0.3 * u(rng);
    p.b3 += u(rng);
    if (mode == lvnn::ArchitectureMode::SparseHard) lvnn::project_weights_inplace(p);
    return p;
}

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("lvnn_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
