#pragma once

#include <cmath>
#include <complex>
#include <random>

#include "barysid/lti.hpp"

namespace testutil {

using namespace barysid;

inline Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

// Random Hurwitz system: random A shifted left of its spectral abscissa.
inline StateSpace random_stable(std::mt19937_64& rng, Index n, double margin = 0.5,
                                double d = 0.0) {
  Matrix A = random_matrix(rng, n, n);
  A -= (spectral_abscissa(A) + margin) * Matrix::Identity(n, n);
  return StateSpace(A, random_matrix(rng, n, 1), random_matrix(rng, 1, n),
                    Matrix::Constant(1, 1, d));
}

inline Matrix random_spd(std::mt19937_64& rng, Index n) {
  Matrix m = random_matrix(rng, n, n);
  return m * m.transpose() + 0.1 * Matrix::Identity(n, n);
}

inline double rel(std::complex<double> a, std::complex<double> b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

}  // namespace testutil
