#pragma once

// Small helpers shared by the test binaries.

#include <random>

#include "seqrec/numcore.hpp"
#include "seqrec/rng.hpp"

namespace seqrec::testing {

inline Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  return DenseMatrix(rows, cols, random_vector(rows * cols, rng, scale));
}

}  // namespace seqrec::testing
