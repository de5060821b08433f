#include "preforge/measurement.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <random>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "preforge/error.hpp"
#include "preforge/least_squares.hpp"
#include "preforge/spectrum.hpp"

namespace preforge {

namespace {

CMatrix projector(const CVector& v) { return v * v.adjoint(); }

CMatrix polar_unitary(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

// Routings: detector -> target (member index, or -1 for a click that must
// not happen), covering every required target.
std::vector<std::vector<int>> routings(int m, int self, const std::vector<int>& targets, int cap) {
  std::vector<int> options = targets;
  options.push_back(-1);
  options.push_back(self);
  std::vector<std::vector<int>> out;
  std::vector<int> cur(m, 0);
  const int no = static_cast<int>(options.size());
  long long total = 1;
  for (int i = 0; i < m; ++i) total *= no;
  for (long long code = 0; code < total && static_cast<int>(out.size()) < cap; ++code) {
    long long c = code;
    std::vector<int> r(m);
    for (int i = 0; i < m; ++i) {
      r[i] = options[c % no];
      c /= no;
    }
    bool covers = std::all_of(targets.begin(), targets.end(), [&](int t) {
      return std::find(r.begin(), r.end(), t) != r.end();
    });
    if (covers) out.push_back(r);
  }
  return out;
}

struct MemberProblem {
  const MasterEquation& me;
  const std::vector<CVector>& phi;
  const RMatrix& kappa;
  int k;
  int m;
  std::vector<int> route;
  bool fixed_s;

  int n_params() const { return fixed_s ? 2 * m : 2 * m * me.num_lindblads() + 2 * m; }

  UnravellingSetting setting(const RVector& p) const {
    const int l = me.num_lindblads();
    UnravellingSetting u;
    u.beta.resize(m);
    int off = 0;
    if (fixed_s) {
      u.s = CMatrix::Identity(m, l);
    } else {
      CMatrix a(m, l);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < l; ++j) a(i, j) = cplx(p(off + 2 * (i * l + j)), p(off + 2 * (i * l + j) + 1));
      off += 2 * m * l;
      u.s = polar_unitary(a);
    }
    for (int i = 0; i < m; ++i) u.beta(i) = cplx(p(off + 2 * i), p(off + 2 * i + 1));
    return u;
  }

  RVector residual(const RVector& p) const {
    const int d = me.dim();
    UnravellingSetting u = setting(p);
    Unravelled un = apply_unravelling(me, u);
    const CVector& ph = phi[k];
    std::vector<RVector> parts;
    auto push_c = [&](const CVector& v) {
      RVector r(2 * d);
      for (int i = 0; i < d; ++i) {
        r(2 * i) = v(i).real();
        r(2 * i + 1) = v(i).imag();
      }
      parts.push_back(r);
    };
    const CMatrix id = CMatrix::Identity(d, d);
    push_c((id - projector(ph)) * (un.effective * ph));
    std::vector<double> rate(kappa.rows(), 0.0);
    for (int i = 0; i < m; ++i) {
      CVector out = un.jumps[i] * ph;
      int t = route[i];
      if (t < 0) {
        push_c(out);
      } else {
        push_c((id - projector(phi[t])) * out);
        rate[t] += out.squaredNorm();
      }
    }
    RVector rr(kappa.rows());
    int nr = 0;
    for (int j = 0; j < kappa.rows(); ++j) {
      if (j == k || kappa(j, k) <= 0) continue;
      rr(nr++) = rate[j] - kappa(j, k);
    }
    parts.push_back(rr.head(nr));
    Eigen::Index total = 0;
    for (const auto& q : parts) total += q.size();
    RVector r(total);
    Eigen::Index o = 0;
    for (const auto& q : parts) {
      r.segment(o, q.size()) = q;
      o += q.size();
    }
    return r;
  }
};

double wlo_bound(const MasterEquation& me, double factor) {
  BlochModel bm = vectorize(me);
  CMatrix rho = bm.rho_ss();
  double best = 0.0;
  for (const auto& c : me.lindblads()) best = std::max(best, (c.adjoint() * c * rho).trace().real());
  return factor * best;
}

struct MemberSolution {
  bool ok = false;
  UnravellingSetting setting;
  std::vector<int> route;
  double best = INFINITY;
};

MemberSolution solve_member(const MasterEquation& me, const std::vector<CVector>& phi, const RMatrix& kappa,
                            int k, int m, double bound, const SynthesisOptions& opt) {
  const int l = me.num_lindblads();
  const int d = me.dim();
  std::vector<int> targets;
  for (int j = 0; j < kappa.rows(); ++j)
    if (j != k && kappa(j, k) > 0) targets.push_back(j);
  MemberSolution best;
  const CMatrix id = CMatrix::Identity(d, d);
  for (const auto& route : routings(m, k, targets, opt.max_routings)) {
    for (int stage = 0; stage < 2; ++stage) {
      const bool fixed_s = stage == 0;
      if (fixed_s && m != l) continue;
      MemberProblem prob{me, phi, kappa, k, m, route, fixed_s};
      std::mt19937_64 rng(mix_seed(opt.rng_seed, 1000 * k + stage));
      std::normal_distribution<double> nd(0.0, 1.0);
      LmOptions lo;
      lo.tol = 1e-13;
      lo.max_iter = 300;
      for (int s = 0; s < opt.starts; ++s) {
        RVector p0 = RVector::Zero(prob.n_params());
        int off = 0;
        if (!fixed_s) {
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < l; ++j) {
              cplx a = s == 0 ? cplx(i == j ? 1.0 : 0.0) : cplx(nd(rng), nd(rng));
              p0(2 * (i * l + j)) = a.real();
              p0(2 * (i * l + j) + 1) = a.imag();
            }
          off = 2 * m * l;
        }
        UnravellingSetting guess_s = prob.setting(p0);
        for (int i = 0; i < m; ++i) {
          cplx beta;
          if (s == 0) {
            // least-squares LO that points the click towards its target
            CMatrix c = CMatrix::Zero(d, d);
            for (int j = 0; j < l; ++j) c += guess_s.s(i, j) * me.lindblad(j);
            int t = route[i];
            CMatrix proj = t < 0 ? id : CMatrix(id - projector(phi[t]));
            CVector v = proj * (c * phi[k]);
            CVector w = proj * phi[k];
            beta = w.squaredNorm() > 1e-12 ? -w.dot(v) / w.squaredNorm() : cplx(0.0);
          } else {
            beta = std::sqrt(bound) * cplx(nd(rng), nd(rng)) / std::sqrt(2.0);
          }
          p0(off + 2 * i) = beta.real();
          p0(off + 2 * i + 1) = beta.imag();
        }
        LmResult res = levenberg_marquardt(
            with_numeric_jacobian([&](const RVector& p) { return prob.residual(p); }, 1e-7), p0, lo);
        UnravellingSetting u = prob.setting(res.params);
        double bsq = u.beta.cwiseAbs2().maxCoeff();
        if (bsq > bound * (1.0 + 1e-9)) continue;
        if (res.max_residual < best.best) {
          best.best = res.max_residual;
          best.setting = u;
          best.route = route;
        }
        if (res.max_residual <= 1e-9) {
          best.ok = true;
          return best;
        }
      }
    }
  }
  return best;
}

}  // namespace

AdaptiveScheme synthesize(const MasterEquation& me, const Ensemble& ens, int m, const SynthesisOptions& opt) {
  if (m < me.num_lindblads())
    throw Error(ErrorKind::InvalidConfig, "detector count M must be >= L");
  const OperatorBasis basis = build_basis(me.dim());
  const std::vector<CVector> phi = state_vectors(ens, basis);
  const double bound = wlo_bound(me, opt.wlo_factor);
  const int k = ens.size();
  std::vector<MemberSolution> sols(k);
  if (opt.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < k; ++i) sols[i] = solve_member(me, phi, ens.kappa, i, m, bound, opt);
  } else {
    for (int i = 0; i < k; ++i) sols[i] = solve_member(me, phi, ens.kappa, i, m, bound, opt);
  }
  AdaptiveScheme scheme;
  for (int i = 0; i < k; ++i) {
    if (!sols[i].ok) {
      std::ostringstream msg;
      msg << "no measurement setting found for member " << i << " with M=" << m
          << " (best residual " << sols[i].best << ")";
      throw Error(ErrorKind::SynthesisFailure, msg.str());
    }
    scheme.settings.push_back(sols[i].setting);
    std::vector<int> route = sols[i].route;
    Unravelled un = apply_unravelling(me, sols[i].setting);
    for (int d = 0; d < m; ++d)
      if ((un.jumps[d] * phi[i]).norm() < 1e-7) route[d] = -1;
    scheme.jump_map.push_back(route);
  }
  return scheme;
}

SchemeReport check_scheme(const MasterEquation& me, const Ensemble& ens, const AdaptiveScheme& scheme) {
  SchemeReport r;
  const OperatorBasis basis = build_basis(me.dim());
  const std::vector<CVector> phi = state_vectors(ens, basis);
  const int d = me.dim();
  const CMatrix id = CMatrix::Identity(d, d);
  const Superoperator lref = lindbladian(me);
  r.wlo_bound = wlo_bound(me, 10.0);
  for (int k = 0; k < scheme.size(); ++k) {
    Unravelled un = apply_unravelling(me, scheme.settings[k]);
    r.invariance = std::max(r.invariance, lindbladian(un.hamiltonian, un.jumps).distance(lref));
    r.eigen_residual = std::max(r.eigen_residual, ((id - projector(phi[k])) * un.effective * phi[k]).norm());
    r.max_beta_sq = std::max(r.max_beta_sq, scheme.settings[k].beta.cwiseAbs2().maxCoeff());
    std::vector<double> rate(ens.size(), 0.0);
    double self = 0.0;
    for (int m = 0; m < static_cast<int>(un.jumps.size()); ++m) {
      CVector out = un.jumps[m] * phi[k];
      int t = scheme.jump_map[k][m];
      if (t < 0) {
        r.direction_residual = std::max(r.direction_residual, out.norm());
        continue;
      }
      r.direction_residual = std::max(r.direction_residual, ((id - projector(phi[t])) * out).norm());
      if (t == k)
        self += out.squaredNorm();
      else
        rate[t] += out.squaredNorm();
    }
    r.self_loop_rates.push_back(self);
    for (int j = 0; j < ens.size(); ++j)
      if (j != k) r.rate_residual = std::max(r.rate_residual, std::abs(rate[j] - ens.kappa(j, k)));
  }
  r.pass = r.eigen_residual <= 1e-8 && r.direction_residual <= 1e-8 && r.rate_residual <= 1e-6 &&
           r.invariance <= 1e-10 * std::max(1.0, lref.matrix().norm());
  return r;
}

PreservationReport check_subspace_preservation(const MasterEquation& me, const AdaptiveScheme& scheme,
                                               const InvariantSubspace& sub, const BlochModel& bm,
                                               int samples, std::uint64_t rng_seed) {
  PreservationReport rep;
  const RMatrix& q = sub.basis_i0;
  const int n = bm.coherence_dim();
  const RMatrix perp = RMatrix::Identity(n, n) - q * q.transpose();
  const double r2 = bm.basis.pure_radius_sq();

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.05, 0.95);
  std::vector<CMatrix> states;
  for (int tries = 0; static_cast<int>(states.size()) < samples && tries < 50 * samples; ++tries) {
    RVector dir = q * RVector::NullaryExpr(q.cols(), [&] { return nd(rng); });
    dir.normalize();
    const double bb = bm.x_ss.dot(dir);
    const double disc = bb * bb - (bm.x_ss.squaredNorm() - r2);
    if (disc < 0) continue;
    const double tmax = -bb + std::sqrt(disc);
    // alternate interior (mixed) and boundary samples
    const double frac = states.size() % 3 == 2 ? 1.0 : ud(rng);
    RVector x = bm.x_ss + frac * tmax * dir;
    CMatrix rho = bloch_to_rho(x, bm.basis);
    if (min_eigenvalue(rho) < -1e-12) continue;
    states.push_back(rho);
  }

  auto check = [&](int member, int detector, const std::function<CMatrix(const CMatrix&)>& op) {
    OperationVerdict v;
    v.member = member;
    v.detector = detector;
    for (const auto& rho : states) {
      CMatrix img = op(rho);
      double tr = img.trace().real();
      if (tr < 1e-12) continue;
      RVector x = bm.basis.coordinates(img / tr);
      double dist = (perp * (x - bm.x_ss)).norm();
      if (dist > v.max_distance) {
        v.max_distance = dist;
        if (dist > 1e-8) v.witness = bm.basis.coordinates(rho);
      }
    }
    v.preserves = v.max_distance <= 1e-8;
    rep.preserves = rep.preserves && v.preserves;
    rep.operations.push_back(std::move(v));
  };

  for (int k = 0; k < scheme.size(); ++k) {
    Unravelled un = apply_unravelling(me, scheme.settings[k]);
    for (int m = 0; m < static_cast<int>(un.jumps.size()); ++m) {
      const CMatrix c = un.jumps[m];
      check(k, m, [&](const CMatrix& rho) { return CMatrix(c * rho * c.adjoint()); });
    }
    const double hn = std::max(un.effective.norm(), 1e-12);
    const CMatrix prop = (-kI * (0.5 / hn) * un.effective).exp();
    check(k, -1, [&](const CMatrix& rho) { return CMatrix(prop * rho * prop.adjoint()); });
  }
  return rep;
}

WignerSchemeReport check_wigner_scheme(const MasterEquation& me, const AdaptiveScheme& scheme,
                                       const WignerSymmetry& w, const std::vector<int>& perm,
                                       const OperatorBasis& basis) {
  if (static_cast<int>(perm.size()) != scheme.size())
    throw Error(ErrorKind::InvalidPermutation, "perm length differs from the scheme size");
  const int n = basis.size();
  RMatrix t = RMatrix::Identity(n, n);
  t.topLeftCorner(n - 1, n - 1) = w.t0;
  const RMatrix tinv = t.inverse();
  const int d = me.dim();
  const std::vector<CMatrix> none;

  std::vector<Unravelled> un;
  for (const auto& s : scheme.settings) un.push_back(apply_unravelling(me, s));
  WignerSchemeReport r;
  double scale = 0.0;
  for (int k = 0; k < scheme.size(); ++k) {
    const int kp = perm[k];
    for (std::size_t m = 0; m < un[k].jumps.size(); ++m) {
      // J[c] rho = c rho c^dag
      RMatrix sk = Superoperator(d, Eigen::kroneckerProduct(un[k].jumps[m].conjugate(), un[k].jumps[m]).eval())
                       .bloch_matrix(basis);
      RMatrix skp = Superoperator(d, Eigen::kroneckerProduct(un[kp].jumps[m].conjugate(), un[kp].jumps[m]).eval())
                        .bloch_matrix(basis);
      scale = std::max(scale, sk.norm());
      double dist = (tinv * skp * t - sk).norm();
      r.jump_distances.push_back(dist);
      r.max_jump_distance = std::max(r.max_jump_distance, dist);
    }
    RMatrix gk = lindbladian(un[k].effective, none).bloch_matrix(basis);
    RMatrix gkp = lindbladian(un[kp].effective, none).bloch_matrix(basis);
    r.max_no_jump_distance = std::max(r.max_no_jump_distance, (tinv * gkp * t - gk).norm());
  }
  const double tol = 1e-8 * std::max(scale, 1.0);
  r.pass = r.max_jump_distance <= tol;
  r.no_jump_transfer = r.max_no_jump_distance <= tol;
  return r;
}

TransformedScheme transform_scheme(const MasterEquation& me, const AdaptiveScheme& scheme,
                                   const WignerOperator& op) {
  TransformedScheme out;
  for (const auto& s : scheme.settings) {
    Unravelled un = apply_unravelling(me, s);
    std::vector<CMatrix> jumps;
    for (const auto& c : un.jumps) jumps.push_back(op.apply(c));
    out.jumps.push_back(std::move(jumps));
    // the no-jump generator -i H_eff maps to -i H~_eff
    CMatrix h = op.antiunitary ? CMatrix(-(op.u * un.effective.conjugate() * op.u.adjoint()))
                               : CMatrix(op.u * un.effective * op.u.adjoint());
    out.effective.push_back(std::move(h));
  }
  return out;
}

}  // namespace preforge
