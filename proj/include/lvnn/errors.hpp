#pragma once

#include <stdexcept>
#include <string>

namespace lvnn {

// Raised when a numerical procedure cannot produce a trustworthy result
// (training divergence, lattice probability failure, implied-vol inversion
// outside the no-arbitrage bounds).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lvnn
