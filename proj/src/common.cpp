#include "reconxf/common.hpp"

#include <algorithm>
#include <cmath>

namespace reconxf {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

std::size_t fraction_count(double fraction, std::size_t total) {
  const double raw = fraction * static_cast<double>(total);
  const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(count, total);
}

}  // namespace reconxf
