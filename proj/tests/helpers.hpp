#pragma once

#include <random>

#include "preforge/algebra.hpp"

namespace testutil {

using namespace preforge;

inline CMatrix random_hermitian(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(n(rng), n(rng));
  return 0.5 * (a + a.adjoint());
}

inline CMatrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = cplx(n(rng), n(rng));
  return a;
}

// Columns orthonormal: S^dag S = 1.
inline CMatrix random_isometry(int rows, int cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(rows, cols, rng));
  return qr.householderQ() * CMatrix::Identity(rows, cols);
}

// Direct GKSL action, the reference for every vectorized form.
inline CMatrix gksl(const CMatrix& h, const std::vector<CMatrix>& cs, const CMatrix& rho) {
  const cplx i(0.0, 1.0);
  CMatrix out = -i * (h * rho - rho * h);
  for (const auto& c : cs) {
    const CMatrix cdc = c.adjoint() * c;
    out += c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
  }
  return out;
}

}  // namespace testutil
