#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "geomlr/symlin.hpp"
#include "geomlr/types.hpp"

namespace geomlr {

// Deterministic draws: the normal generator is hand-rolled (Box-Muller on
// mt19937_64 bits) because std::normal_distribution is implementation-defined
// and would break cross-platform reproducibility of datasets and digests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // uniform in (0, 1]
  double uniform() { return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi_ * u2);
  }

  // uniform in [0, bound)
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(eng_()) * bound) >> 64);
  }

 private:
  std::mt19937_64 eng_;
  static constexpr double pi_ = 3.14159265358979323846;
};

inline Matrix gauss_matrix(Rng& rng, Index rows, Index cols, double scale) {
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = scale * rng.normal();
  return M;
}

inline SymmetricMatrix sym_gauss(Rng& rng, Index n, double scale) {
  Matrix M(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double g = scale * rng.normal();
      M(i, j) = M(j, i) = g;
    }
  }
  return SymmetricMatrix(M);
}

inline SkewMatrix skew_gauss(Rng& rng, Index n, double scale) {
  Matrix M = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < i; ++j) {
      const double g = scale * rng.normal();
      M(i, j) = g;
      M(j, i) = -g;
    }
  }
  return SkewMatrix(M);
}

inline SpdMatrix random_spd(Rng& rng, Index n, double spread) {
  return SpdMatrix(funcm(sym_gauss(rng, n, spread), fn::exp()).mat());
}

inline void shuffle_indices(Rng& rng, std::vector<Index>& idx) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace geomlr
