#pragma once

#include <vector>

#include "preforge/types.hpp"

namespace preforge {

// Generalized Gell-Mann basis. Elements 0..D^2-2 are traceless with
// Tr[s_i s_j] = 2 delta_ij; the last element is the identity.
class OperatorBasis {
 public:
  OperatorBasis() = default;
  OperatorBasis(int dim, std::vector<CMatrix> elements);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(elements_.size()); }
  int traceless_count() const { return size() - 1; }
  const CMatrix& element(int i) const { return elements_.at(i); }
  const std::vector<CMatrix>& elements() const { return elements_; }

  // Squared radius of the pure-state sphere, D(D-1)/2.
  double pure_radius_sq() const { return 0.5 * dim_ * (dim_ - 1); }

  // (D/2) Tr[m s_i] for the traceless elements, no trace check.
  RVector coordinates(const CMatrix& m) const;
  // Inverse of coordinates() with an explicit trace: (1/D)(tr*1 + sum x_i s_i).
  CMatrix compose(const RVector& x, double trace = 1.0) const;

  // Lie bracket in coherence coordinates: (x ^ y)_k = sum_ij f_ijk x_i y_j
  // with [s_i, s_j] = 2i sum_k f_ijk s_k. For D=2 this is the cross product.
  RVector bracket(const RVector& x, const RVector& y) const;
  // Matrix of y -> x ^ y.
  RMatrix bracket_matrix(const RVector& x) const;

 private:
  int dim_ = 0;
  std::vector<CMatrix> elements_;
  // structure_[k](i,j) = f_ijk
  std::vector<RMatrix> structure_;
};

OperatorBasis build_basis(int dim);

RVector rho_to_bloch(const CMatrix& rho, const OperatorBasis& basis);
CMatrix bloch_to_rho(const RVector& x, const OperatorBasis& basis);

// Coherence vector of |psi><psi| / <psi|psi>.
RVector state_to_bloch(const CVector& psi, const OperatorBasis& basis);
// Dominant eigenvector of the reconstructed density matrix.
CVector bloch_to_state(const RVector& x, const OperatorBasis& basis);

double min_eigenvalue(const CMatrix& hermitian);
double purity(const CMatrix& rho);

// Linear map on D x D matrices, stored as a D^2 x D^2 matrix acting on
// column-stacked vec(rho).
class Superoperator {
 public:
  Superoperator() = default;
  Superoperator(int dim, CMatrix matrix);

  static Superoperator from_images(int dim, const std::vector<CMatrix>& unit_images);
  static Superoperator zero(int dim);

  int dim() const { return dim_; }
  const CMatrix& matrix() const { return matrix_; }
  CMatrix apply(const CMatrix& rho) const;

  // Real D^2 x D^2 representation on (x, Tr rho) coordinates; the top-left
  // block is L0 and the last column (minus its last entry) is b.
  RMatrix bloch_matrix(const OperatorBasis& basis) const;

  double distance(const Superoperator& other) const;

 private:
  int dim_ = 0;
  CMatrix matrix_;
};

CVector vec(const CMatrix& m);
CMatrix unvec(const CVector& v, int dim);

// Haar-random pure state and Hilbert-Schmidt random density matrix.
template <class Rng>
CVector random_state(int dim, Rng& rng);
template <class Rng>
CMatrix random_density(int dim, Rng& rng);

}  // namespace preforge

#include "preforge/detail/random_impl.hpp"
