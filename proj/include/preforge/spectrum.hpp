#pragma once

#include <vector>

#include "preforge/types.hpp"

namespace preforge {

struct EigenCluster {
  cplx value;
  int algebraic = 0;
  int geometric = 0;
  // Orthonormal basis of the eigenspace. Real vectors for real eigenvalues.
  std::vector<CVector> eigenvectors;
  // Each chain is (e_1, ..., e_m) with (M - value) e_j = e_{j-1}, (M - value) e_1 = 0.
  std::vector<std::vector<CVector>> chains;

  bool defective() const { return geometric < algebraic; }
  bool is_real(double tol) const { return std::abs(value.imag()) <= tol; }
};

struct Spectrum {
  std::vector<cplx> eigenvalues;
  std::vector<EigenCluster> clusters;
  double norm = 0.0;
  double tolerance = 0.0;
  bool defective() const;
};

// Spectral norm.
double norm2(const RMatrix& m);

// Orthonormal basis (columns) of the span of the columns of m, numerical
// rank decided relative to the largest singular value.
RMatrix orth(const RMatrix& m, double rel_tol = 1e-10);
RMatrix null_space(const RMatrix& m, double abs_tol);
CMatrix null_space(const CMatrix& m, double abs_tol);

// Eigen-decomposition with tolerance clustering (1e-8 * ||m|| by default)
// and Jordan chains for defective clusters.
Spectrum eig_full(const RMatrix& m, double rel_tol = 1e-8);

}  // namespace preforge
