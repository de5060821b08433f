#include "preforge/least_squares.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/LevenbergMarquardt>

namespace preforge {

namespace {

// Adapter for Eigen's MINPACK port. Residuals are zero-padded to at least
// as many rows as parameters, which lmder requires.
struct Functor {
  using Scalar = double;
  using InputType = RVector;
  using ValueType = RVector;
  using JacobianType = RMatrix;
  using QRSolver = Eigen::ColPivHouseholderQR<RMatrix>;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const ResidualFn& f;
  Eigen::Index n;
  Eigen::Index m;
  mutable RVector r;
  mutable RMatrix j;

  Eigen::Index inputs() const { return n; }
  Eigen::Index values() const { return m; }

  int operator()(const RVector& p, RVector& out) const {
    f(p, r, nullptr);
    out.setZero(m);
    out.head(r.size()) = r.allFinite() ? r : RVector(RVector::Constant(r.size(), 1e150));
    return 0;
  }
  int df(const RVector& p, RMatrix& out) const {
    f(p, r, &j);
    out.setZero(m, n);
    out.topRows(j.rows()) = j.allFinite() ? j : RMatrix(RMatrix::Zero(j.rows(), n));
    return 0;
  }
};

}  // namespace

LmResult levenberg_marquardt(const ResidualFn& f, RVector p0, const LmOptions& opt) {
  LmResult res;
  RVector r;
  f(p0, r, nullptr);
  const Eigen::Index n = p0.size();
  Functor fn{f, n, std::max<Eigen::Index>(r.size(), n), RVector(), RMatrix()};
  Eigen::LevenbergMarquardt<Functor> lm(fn);
  lm.setMaxfev(opt.max_iter);
  lm.setFtol(0.0);
  lm.setXtol(opt.step_tol);
  lm.setGtol(0.0);
  RVector p = std::move(p0);
  if (r.size() && r.allFinite() && r.cwiseAbs().maxCoeff() > opt.tol) {
    lm.minimize(p);
    res.iterations = static_cast<int>(lm.iterations());
  }
  f(p, r, nullptr);
  res.params = std::move(p);
  res.max_residual = r.size() && r.allFinite() ? r.cwiseAbs().maxCoeff() : (r.size() ? INFINITY : 0.0);
  if (res.params.size() && res.params.cwiseAbs().maxCoeff() > opt.max_param) res.max_residual = INFINITY;
  res.converged = res.max_residual <= opt.tol;
  return res;
}

ResidualFn with_numeric_jacobian(std::function<RVector(const RVector&)> f, double h) {
  return [f = std::move(f), h](const RVector& p, RVector& r, RMatrix* jac) {
    r = f(p);
    if (!jac) return;
    jac->resize(r.size(), p.size());
    RVector q = p;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double step = h * std::max(1.0, std::abs(p(i)));
      q(i) = p(i) + step;
      RVector rp = f(q);
      q(i) = p(i) - step;
      RVector rm = f(q);
      q(i) = p(i);
      jac->col(i) = (rp - rm) / (2.0 * step);
    }
  };
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace preforge
