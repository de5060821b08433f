#include "preforge/model.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "preforge/error.hpp"
#include "preforge/spectrum.hpp"

namespace preforge {

MasterEquation::MasterEquation(CMatrix hamiltonian, std::vector<CMatrix> lindblads)
    : hamiltonian_(std::move(hamiltonian)), lindblads_(std::move(lindblads)) {
  const int d = static_cast<int>(hamiltonian_.rows());
  if (d < 2 || hamiltonian_.cols() != d)
    throw Error(ErrorKind::InvalidDimension, "Hamiltonian must be square with D >= 2");
  double hscale = std::max(1.0, hamiltonian_.norm());
  if ((hamiltonian_ - hamiltonian_.adjoint()).norm() > 1e-12 * hscale)
    throw Error(ErrorKind::AssumptionViolation, "Hamiltonian is not Hermitian");
  hamiltonian_ = 0.5 * (hamiltonian_ + hamiltonian_.adjoint());
  if (static_cast<int>(lindblads_.size()) > d * d - 1)
    throw Error(ErrorKind::AssumptionViolation, "more than D^2-1 Lindblad operators");

  const CMatrix id = CMatrix::Identity(d, d);
  for (std::size_t l = 0; l < lindblads_.size(); ++l) {
    CMatrix& c = lindblads_[l];
    if (c.rows() != d || c.cols() != d)
      throw Error(ErrorKind::Shape, "Lindblad operator " + std::to_string(l) + " has wrong size");
    cplx a = c.trace() / static_cast<double>(d);
    if (std::abs(a) > 1e-14 * std::max(1.0, c.norm())) {
      // c = c0 + a; keeping L fixed needs H += (i/2)(conj(a) c0 - a c0^dag)
      CMatrix c0 = c - a * id;
      hamiltonian_ += cplx(0.0, 0.5) * (std::conj(a) * c0 - a * c0.adjoint());
      c = c0;
      std::ostringstream msg;
      msg << "Lindblad operator " << l << " had trace " << a * static_cast<double>(d)
          << "; shifted to traceless form with a Hamiltonian correction";
      warnings_.push_back(msg.str());
    }
  }
  if (!lindblads_.empty()) {
    CMatrix stack(d * d, lindblads_.size());
    for (std::size_t l = 0; l < lindblads_.size(); ++l) stack.col(l) = vec(lindblads_[l]);
    Eigen::JacobiSVD<CMatrix> svd(stack);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-10 * std::max(s(0), 1e-300))
      throw Error(ErrorKind::AssumptionViolation, "Lindblad operators are linearly dependent");
  }
}

CMatrix MasterEquation::effective_hamiltonian() const {
  CMatrix h = hamiltonian_;
  for (const auto& c : lindblads_) h -= cplx(0.0, 0.5) * (c.adjoint() * c);
  return h;
}

Superoperator lindbladian(const CMatrix& hamiltonian, const std::vector<CMatrix>& jumps) {
  const int d = static_cast<int>(hamiltonian.rows());
  const CMatrix id = CMatrix::Identity(d, d);
  CMatrix heff = hamiltonian;
  for (const auto& c : jumps) heff -= cplx(0.0, 0.5) * (c.adjoint() * c);
  // vec(A X B) = (B^T kron A) vec(X)
  CMatrix m = -kI * (Eigen::kroneckerProduct(id, heff).eval() -
                     Eigen::kroneckerProduct(heff.conjugate(), id).eval());
  for (const auto& c : jumps) m += Eigen::kroneckerProduct(c.conjugate(), c).eval();
  return Superoperator(d, std::move(m));
}

Superoperator lindbladian(const MasterEquation& me) {
  return lindbladian(me.hamiltonian(), me.lindblads());
}

BlochModel vectorize(const MasterEquation& me, const OperatorBasis& basis) {
  if (basis.dim() != me.dim())
    throw Error(ErrorKind::Shape, "basis dimension does not match master equation");
  BlochModel bm;
  bm.basis = basis;
  bm.generator = lindbladian(me);
  const RMatrix full = bm.generator.bloch_matrix(basis);
  const int n = basis.traceless_count();
  bm.l0 = full.topLeftCorner(n, n);
  bm.b = full.col(n).head(n);

  Eigen::FullPivLU<RMatrix> lu(bm.l0);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible())
    throw Error(ErrorKind::NoUniqueSteadyState, "L0 is singular; steady state is not unique");
  bm.x_ss = lu.solve(-bm.b);

  Eigen::EigenSolver<RMatrix> es(bm.l0, false);
  const double scale = std::max(norm2(bm.l0), 1e-300);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i).real() >= -1e-12 * scale) {
      std::ostringstream msg;
      msg << "L0 has eigenvalue " << es.eigenvalues()(i) << " with non-negative real part";
      throw Error(ErrorKind::NoUniqueSteadyState, msg.str());
    }
  const double mineig = min_eigenvalue(bm.rho_ss());
  if (mineig <= 1e-12)
    throw Error(ErrorKind::AssumptionViolation,
                "steady state is not full rank (min eigenvalue " + std::to_string(mineig) + ")");
  return bm;
}

BlochModel vectorize(const MasterEquation& me) { return vectorize(me, build_basis(me.dim())); }

UnravellingSetting UnravellingSetting::identity(int l) {
  return {CMatrix::Identity(l, l), CVector::Zero(l)};
}

void UnravellingSetting::validate(int num_lindblads, double tol) const {
  if (s.cols() != num_lindblads)
    throw Error(ErrorKind::InvalidSetting, "S must have L columns");
  if (s.rows() < s.cols()) throw Error(ErrorKind::InvalidSetting, "S needs M >= L");
  if (beta.size() != s.rows()) throw Error(ErrorKind::InvalidSetting, "beta must have M entries");
  const CMatrix g = s.adjoint() * s;
  if ((g - CMatrix::Identity(s.cols(), s.cols())).norm() > tol)
    throw Error(ErrorKind::InvalidSetting, "S is not semi-unitary");
}

Unravelled apply_unravelling(const MasterEquation& me, const UnravellingSetting& u) {
  u.validate(me.num_lindblads());
  const int d = me.dim();
  const CMatrix id = CMatrix::Identity(d, d);
  Unravelled out;
  out.hamiltonian = me.hamiltonian();
  for (int m = 0; m < u.detectors(); ++m) {
    CMatrix c = u.beta(m) * id;
    for (int l = 0; l < me.num_lindblads(); ++l) c += u.s(m, l) * me.lindblad(l);
    out.hamiltonian -= cplx(0.0, 0.5) * (std::conj(u.beta(m)) * c - u.beta(m) * c.adjoint());
    out.jumps.push_back(std::move(c));
  }
  out.effective = out.hamiltonian;
  for (const auto& c : out.jumps) out.effective -= cplx(0.0, 0.5) * (c.adjoint() * c);
  return out;
}

CMatrix no_jump_generator(const MasterEquation& me, const UnravellingSetting& u) {
  return apply_unravelling(me, u).effective;
}

}  // namespace preforge
