#pragma once

#include "oblab/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oblab {

// Rank-1 lattice rule with a seeded random shift: point i has coordinates
// frac(i * z_j / N + shift_j).  The Korobov generating vector is adequate at
// the smoothness in play here; accuracy is always cross-checked by a
// two-seed discrepancy estimate rather than assumed.
class Rank1Lattice {
 public:
  Rank1Lattice(int dim, int n_points, std::uint64_t seed, std::uint64_t a = 6229)
      : dim_(dim), n_(n_points), gen_(dim), shift_(dim) {
    std::uint64_t zj = 1;
    for (int j = 0; j < dim; ++j) {
      gen_[j] = static_cast<double>(zj % static_cast<std::uint64_t>(n_)) / n_;
      zj = (zj * a) % static_cast<std::uint64_t>(n_);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int j = 0; j < dim; ++j) shift_[j] = uni(rng);
  }

  int size() const { return n_; }
  int dim() const { return dim_; }

  // Writes point i into out[0..dim), coordinates in [0,1).
  void point(int i, double* out) const {
    for (int j = 0; j < dim_; ++j) {
      double v = gen_[j] * i + shift_[j];
      out[j] = v - std::floor(v);
    }
  }

 private:
  int dim_, n_;
  std::vector<double> gen_, shift_;
};

// The standard even bump exp(-1/(1-|Y|^2)) on |Y|<1, zero outside.  Mass is
// normalized discretely by the caller (ratio estimator), so no closed-form
// volume constant is needed.
inline double bump(double r2) {
  if (r2 >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - r2));
}

}  // namespace oblab
