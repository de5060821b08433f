#include "preforge/algebra.hpp"

#include <cmath>

#include "preforge/error.hpp"

namespace preforge {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::Normalization: return "normalization";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::NumericalConvergence: return "numerical-convergence";
    case ErrorKind::NoUniqueSteadyState: return "no-unique-steady-state";
    case ErrorKind::AssumptionViolation: return "assumption-violation";
    case ErrorKind::InvalidSetting: return "invalid-setting";
    case ErrorKind::InconsistentSubspace: return "inconsistent-subspace";
    case ErrorKind::InfeasibleSubspace: return "infeasible-subspace";
    case ErrorKind::InvalidPermutation: return "invalid-permutation";
    case ErrorKind::SymmetryViolation: return "symmetry-violation";
    case ErrorKind::SynthesisFailure: return "synthesis-failure";
    case ErrorKind::RealizationFailure: return "realization-failure";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UnboundParameter: return "unbound-parameter";
  }
  return "unknown";
}

OperatorBasis::OperatorBasis(int dim, std::vector<CMatrix> elements)
    : dim_(dim), elements_(std::move(elements)) {
  const int n = traceless_count();
  structure_.assign(n, RMatrix::Zero(n, n));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      CMatrix comm = elements_[i] * elements_[j] - elements_[j] * elements_[i];
      for (int k = 0; k < n; ++k) {
        // Tr([s_i,s_j] s_k) = 4i f_ijk
        double f = ((comm * elements_[k]).trace() / cplx(0.0, 4.0)).real();
        if (std::abs(f) < 1e-14) f = 0.0;
        structure_[k](i, j) = f;
        structure_[k](j, i) = -f;
      }
    }
  }
}

RVector OperatorBasis::coordinates(const CMatrix& m) const {
  if (m.rows() != dim_ || m.cols() != dim_)
    throw Error(ErrorKind::Shape, "matrix size does not match basis dimension");
  RVector x(traceless_count());
  for (int i = 0; i < traceless_count(); ++i)
    x(i) = 0.5 * dim_ * (m * elements_[i]).trace().real();
  return x;
}

CMatrix OperatorBasis::compose(const RVector& x, double trace) const {
  if (x.size() != traceless_count())
    throw Error(ErrorKind::Shape, "coherence vector length must be D^2-1 = " +
                                      std::to_string(traceless_count()));
  CMatrix m = trace * CMatrix::Identity(dim_, dim_);
  for (int i = 0; i < traceless_count(); ++i) m += x(i) * elements_[i];
  return m / static_cast<double>(dim_);
}

RVector OperatorBasis::bracket(const RVector& x, const RVector& y) const {
  RVector out(traceless_count());
  for (int k = 0; k < traceless_count(); ++k) out(k) = x.dot(structure_[k] * y);
  return out;
}

RMatrix OperatorBasis::bracket_matrix(const RVector& x) const {
  const int n = traceless_count();
  RMatrix m(n, n);
  for (int k = 0; k < n; ++k) m.row(k) = x.transpose() * structure_[k];
  return m;
}

OperatorBasis build_basis(int dim) {
  if (dim < 2) throw Error(ErrorKind::InvalidDimension, "basis dimension must be >= 2");
  std::vector<CMatrix> el;
  el.reserve(dim * dim);
  for (int j = 0; j < dim; ++j)
    for (int k = j + 1; k < dim; ++k) {
      CMatrix m = CMatrix::Zero(dim, dim);
      m(j, k) = 1.0;
      m(k, j) = 1.0;
      el.push_back(m);
    }
  for (int j = 0; j < dim; ++j)
    for (int k = j + 1; k < dim; ++k) {
      CMatrix m = CMatrix::Zero(dim, dim);
      m(j, k) = -kI;
      m(k, j) = kI;
      el.push_back(m);
    }
  for (int l = 1; l < dim; ++l) {
    CMatrix m = CMatrix::Zero(dim, dim);
    double s = std::sqrt(2.0 / (l * (l + 1.0)));
    for (int j = 0; j < l; ++j) m(j, j) = s;
    m(l, l) = -s * l;
    el.push_back(m);
  }
  el.push_back(CMatrix::Identity(dim, dim));
  return OperatorBasis(dim, std::move(el));
}

RVector rho_to_bloch(const CMatrix& rho, const OperatorBasis& basis) {
  if (rho.rows() != basis.dim() || rho.cols() != basis.dim())
    throw Error(ErrorKind::Shape, "density matrix size does not match basis");
  cplx tr = rho.trace();
  if (std::abs(tr - 1.0) > 1e-10)
    throw Error(ErrorKind::Normalization,
                "density matrix trace " + std::to_string(tr.real()) + " differs from 1");
  return basis.coordinates(rho);
}

CMatrix bloch_to_rho(const RVector& x, const OperatorBasis& basis) {
  return basis.compose(x, 1.0);
}

RVector state_to_bloch(const CVector& psi, const OperatorBasis& basis) {
  CVector p = psi / psi.norm();
  return basis.coordinates(p * p.adjoint());
}

CVector bloch_to_state(const RVector& x, const OperatorBasis& basis) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(bloch_to_rho(x, basis));
  CVector v = es.eigenvectors().col(basis.dim() - 1);
  // fix the global phase: largest component real positive
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  v *= std::conj(v(imax)) / std::abs(v(imax));
  return v;
}

double min_eigenvalue(const CMatrix& hermitian) {
  CMatrix h = 0.5 * (hermitian + hermitian.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double purity(const CMatrix& rho) { return (rho * rho).trace().real(); }

CVector vec(const CMatrix& m) {
  return Eigen::Map<const CVector>(m.data(), m.size());
}

CMatrix unvec(const CVector& v, int dim) {
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

Superoperator::Superoperator(int dim, CMatrix matrix) : dim_(dim), matrix_(std::move(matrix)) {
  if (matrix_.rows() != dim * dim || matrix_.cols() != dim * dim)
    throw Error(ErrorKind::Shape, "superoperator matrix must be D^2 x D^2");
}

Superoperator Superoperator::from_images(int dim, const std::vector<CMatrix>& unit_images) {
  if (static_cast<int>(unit_images.size()) != dim * dim)
    throw Error(ErrorKind::Shape, "need D^2 matrix-unit images");
  CMatrix m(dim * dim, dim * dim);
  for (int c = 0; c < dim * dim; ++c) m.col(c) = vec(unit_images[c]);
  return Superoperator(dim, std::move(m));
}

Superoperator Superoperator::zero(int dim) {
  return Superoperator(dim, CMatrix::Zero(dim * dim, dim * dim));
}

CMatrix Superoperator::apply(const CMatrix& rho) const {
  return unvec(matrix_ * vec(rho), dim_);
}

RMatrix Superoperator::bloch_matrix(const OperatorBasis& basis) const {
  const int n = basis.size();
  const double d = basis.dim();
  RMatrix m(n, n);
  for (int j = 0; j < n; ++j) {
    CMatrix img = apply(basis.element(j) / d);
    m.col(j).head(n - 1) = basis.coordinates(img);
    m(n - 1, j) = img.trace().real();
  }
  return m;
}

double Superoperator::distance(const Superoperator& other) const {
  return (matrix_ - other.matrix_).norm();
}

}  // namespace preforge
