#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace reconxf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Rng = std::mt19937_64;

/// Raised for invalid inputs, malformed files and numerical failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mixes a base seed with a stream index (splitmix64 finalizer), so that
/// per-row / per-node / per-run generators are independent but reproducible.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

/// True when every entry is finite.
bool all_finite(const Matrix& m);

/// Number of items selected by a fraction, ceil(fraction * total) with a
/// guard against floating error (0.1 * 30 must give 3, not 4).
std::size_t fraction_count(double fraction, std::size_t total);

}  // namespace reconxf
