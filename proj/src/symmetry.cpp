#include "preforge/symmetry.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "preforge/error.hpp"
#include "preforge/least_squares.hpp"
#include "preforge/spectrum.hpp"

namespace preforge {

namespace {

struct SpanOption {
  RMatrix span;
  std::string label;
  bool family = false;
  RMatrix generator;
};

std::string fmt_value(cplx v) {
  std::ostringstream s;
  s.precision(6);
  if (v.imag() == 0.0)
    s << v.real();
  else
    s << v.real() << (v.imag() >= 0 ? "+" : "-") << std::abs(v.imag()) << "i";
  return s.str();
}

// Orthonormal basis of span(v) aligned with the coordinate axes where possible.
RMatrix canonical_basis(const RMatrix& v) {
  RMatrix q = orth(v);
  const int n = static_cast<int>(q.rows());
  const int g = static_cast<int>(q.cols());
  RMatrix p = q * q.transpose();
  RMatrix out(n, 0);
  for (int i = 0; i < n && out.cols() < g; ++i) {
    RVector c = p.col(i);
    if (out.cols() > 0) c -= out * (out.transpose() * c);
    if (c.norm() < 1e-6) continue;
    out.conservativeResize(n, out.cols() + 1);
    out.col(out.cols() - 1) = c / c.norm();
  }
  // re-orthogonalize to machine precision
  Eigen::HouseholderQR<RMatrix> qr(out);
  RMatrix r = qr.householderQ() * RMatrix::Identity(n, g);
  for (int j = 0; j < g; ++j)
    if (r.col(j).dot(out.col(j)) < 0) r.col(j) *= -1.0;
  return r;
}

// Orthonormalize columns in order, so leading column blocks keep their span.
RMatrix ordered_orth(const RMatrix& m) {
  Eigen::HouseholderQR<RMatrix> qr(m);
  RMatrix q = qr.householderQ() * RMatrix::Identity(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (q.col(j).dot(m.col(j)) < 0) q.col(j) *= -1.0;
  return q;
}

RMatrix complement(const RMatrix& q) {
  const int n = static_cast<int>(q.rows());
  if (q.cols() == 0) return RMatrix::Identity(n, n);
  return null_space(RMatrix(q.transpose()), 1e-10);
}

std::optional<RVector> pure_witness(const BlochModel& bm, const RMatrix& q, int starts,
                                    std::uint64_t seed) {
  const int d = bm.dim();
  const double r2 = bm.basis.pure_radius_sq();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  if (d == 2) {
    // the translated span always cuts the Bloch sphere since x_ss is interior
    RVector dir = q * RVector::NullaryExpr(q.cols(), [&] { return nd(rng); });
    dir.normalize();
    const double bb = bm.x_ss.dot(dir);
    const double cc = bm.x_ss.squaredNorm() - r2;
    const double disc = bb * bb - cc;
    if (disc < 0) return std::nullopt;
    return RVector(bm.x_ss + (-bb + std::sqrt(disc)) * dir);
  }
  const RMatrix perp = RMatrix::Identity(q.rows(), q.rows()) - q * q.transpose();
  auto f = [&](const RVector& p) {
    CVector psi(d);
    for (int i = 0; i < d; ++i) psi(i) = cplx(p(2 * i), p(2 * i + 1));
    if (psi.norm() < 1e-12) return RVector(RVector::Constant(q.rows(), 1e3));
    return RVector(perp * (state_to_bloch(psi, bm.basis) - bm.x_ss));
  };
  LmOptions opt;
  opt.tol = 1e-11;
  opt.max_iter = 300;
  for (int s = 0; s < starts; ++s) {
    RVector p0(2 * d);
    for (int i = 0; i < 2 * d; ++i) p0(i) = nd(rng);
    LmResult res = levenberg_marquardt(with_numeric_jacobian(f), p0, opt);
    if (res.max_residual <= 1e-9) {
      CVector psi(d);
      for (int i = 0; i < d; ++i) psi(i) = cplx(res.params(2 * i), res.params(2 * i + 1));
      return state_to_bloch(psi, bm.basis);
    }
  }
  return std::nullopt;
}

std::vector<std::vector<SpanOption>> span_groups(const BlochModel& bm) {
  const Spectrum sp = eig_full(bm.l0);
  std::vector<std::vector<SpanOption>> groups;
  for (const auto& c : sp.clusters) {
    if (c.value.imag() < -sp.tolerance) continue;
    const bool real = c.is_real(sp.tolerance);
    const std::string lab = "eig(" + fmt_value(c.value) + ")";
    auto to_real = [&](const std::vector<CVector>& vs) {
      RMatrix m(bm.coherence_dim(), 0);
      for (const auto& v : vs) {
        int cols = real ? 1 : 2;
        m.conservativeResize(Eigen::NoChange, m.cols() + cols);
        if (real) {
          m.col(m.cols() - 1) = v.real();
        } else {
          m.col(m.cols() - 2) = v.real();
          m.col(m.cols() - 1) = v.imag();
        }
      }
      return m;
    };
    if (!c.defective()) {
      RMatrix all = real ? canonical_basis(to_real(c.eigenvectors)) : ordered_orth(to_real(c.eigenvectors));
      const int step = real ? 1 : 2;
      std::vector<SpanOption> opts;
      for (int j = step; j <= all.cols(); j += step) {
        SpanOption o;
        o.span = all.leftCols(j);
        o.label = lab + (all.cols() > step ? "[" + std::to_string(j / step) + "/" +
                                                 std::to_string(all.cols() / step) + "]"
                                           : "");
        if (j < all.cols()) {
          o.family = true;
          o.generator = all.col(0) * all.col(step).transpose() - all.col(step) * all.col(0).transpose();
        }
        opts.push_back(std::move(o));
      }
      groups.push_back(std::move(opts));
    } else {
      for (std::size_t ci = 0; ci < c.chains.size(); ++ci) {
        const auto& ch = c.chains[ci];
        std::vector<SpanOption> opts;
        for (std::size_t j = 1; j <= ch.size(); ++j) {
          SpanOption o;
          o.span = orth(to_real({ch.begin(), ch.begin() + j}));
          o.label = "chain" + std::to_string(ci) + lab + "[1.." + std::to_string(j) + "]";
          opts.push_back(std::move(o));
        }
        groups.push_back(std::move(opts));
      }
    }
  }
  return groups;
}

}  // namespace

InvariantSubspace make_subspace(const BlochModel& bm, const RMatrix& span, std::string label) {
  InvariantSubspace s;
  s.basis_i0 = orth(span);
  s.basis_r0 = complement(s.basis_i0);
  s.label = std::move(label);
  const double scale = std::max(norm2(bm.l0), 1e-300);
  s.certificate = s.basis_r0.cols() ? norm2(s.basis_r0.transpose() * bm.l0 * s.basis_i0) : 0.0;
  if (s.certificate > 1e-8 * scale)
    throw Error(ErrorKind::InconsistentSubspace,
                "span is not invariant under L0 (certificate " + std::to_string(s.certificate) + ")");
  auto w = pure_witness(bm, s.basis_i0, 16, 11);
  if (!w) throw Error(ErrorKind::InfeasibleSubspace, "no pure state in the translated subspace");
  s.witness = *w;
  return s;
}

std::vector<InvariantSubspace> find_invariant_subspaces(const BlochModel& bm, int n_min, int n_max,
                                                        const SubspaceSearchOptions& opt) {
  const int n = bm.coherence_dim();
  n_min = std::max(n_min, 1);
  n_max = std::min(n_max, n - 1);
  const auto groups = span_groups(bm);
  const double scale = std::max(norm2(bm.l0), 1e-300);

  std::vector<InvariantSubspace> out;
  std::vector<RMatrix> seen;
  int candidates = 0;
  std::vector<const SpanOption*> chosen;

  auto consider = [&]() {
    if (chosen.empty()) return;
    RMatrix cat(n, 0);
    std::string label;
    bool family = false;
    RMatrix gen;
    for (const SpanOption* o : chosen) {
      cat.conservativeResize(Eigen::NoChange, cat.cols() + o->span.cols());
      cat.rightCols(o->span.cols()) = o->span;
      label += (label.empty() ? "" : "+") + o->label;
      if (o->family && !family) {
        family = true;
        gen = o->generator;
      }
    }
    RMatrix q = orth(cat);
    if (q.cols() < n_min || q.cols() > n_max) return;
    RMatrix p = q * q.transpose();
    for (const auto& s : seen)
      if (s.rows() == p.rows() && (s - p).norm() < 1e-8) return;
    seen.push_back(p);
    ++candidates;
    InvariantSubspace sub;
    sub.basis_i0 = q;
    sub.basis_r0 = complement(q);
    sub.certificate = sub.basis_r0.cols() ? norm2(sub.basis_r0.transpose() * bm.l0 * q) : 0.0;
    if (sub.certificate > 1e-8 * scale) return;
    auto w = pure_witness(bm, q, opt.witness_starts, mix_seed(opt.rng_seed, candidates));
    if (!w) return;
    sub.witness = *w;
    sub.label = label;
    sub.family = family;
    if (family) {
      sub.family_generator = gen;
      sub.family_note = "degenerate eigenspace: every rotation of this span by the generator is also invariant";
    }
    out.push_back(std::move(sub));
  };

  // depth-first over groups, each group contributes nothing or one option
  std::function<void(std::size_t, int)> rec = [&](std::size_t g, int dim) {
    if (candidates >= opt.max_candidates) return;
    if (g == groups.size()) {
      consider();
      return;
    }
    rec(g + 1, dim);
    for (const auto& o : groups[g]) {
      if (dim + o.span.cols() > n_max) break;
      chosen.push_back(&o);
      rec(g + 1, dim + static_cast<int>(o.span.cols()));
      chosen.pop_back();
    }
  };
  rec(0, 0);

  std::stable_sort(out.begin(), out.end(),
                   [](const InvariantSubspace& a, const InvariantSubspace& b) { return a.n() < b.n(); });
  return out;
}

BlockForm block_form(const BlochModel& bm, const InvariantSubspace& sub) {
  const double scale = std::max(norm2(bm.l0), 1e-300);
  const RMatrix& q = sub.basis_i0;
  const RMatrix& r = sub.basis_r0;
  if (r.cols() && norm2(r.transpose() * bm.l0 * q) > 1e-8 * scale)
    throw Error(ErrorKind::InconsistentSubspace, "block certificate violated");
  BlockForm f;
  f.l_i0 = q.transpose() * bm.l0 * q;
  f.l_i0r0 = q.transpose() * bm.l0 * r;
  f.l_r0 = r.transpose() * bm.l0 * r;
  f.dual_invariant = f.l_i0r0.size() == 0 || norm2(f.l_i0r0) <= 1e-8 * scale;
  return f;
}

const char* to_string(SymmetryKind k) {
  switch (k) {
    case SymmetryKind::Unitary: return "unitary";
    case SymmetryKind::Antiunitary: return "antiunitary";
    case SymmetryKind::Unknown: return "unknown";
  }
  return "unknown";
}

WignerSymmetry WignerSymmetry::identity(int n) {
  WignerSymmetry w;
  w.t0 = RMatrix::Identity(n, n);
  w.kind = SymmetryKind::Unitary;
  w.tag = "identity";
  return w;
}

WignerSymmetry WignerSymmetry::at_angle(double theta) const {
  if (!generator) throw Error(ErrorKind::InvalidConfig, "symmetry has no continuous generator");
  WignerSymmetry w = *this;
  w.angle = theta;
  w.t0 = (theta * *generator).exp();
  std::ostringstream s;
  s << "rotation(" << theta << ")";
  w.tag = s.str();
  return w;
}

WignerSymmetry WignerSymmetry::compose(const WignerSymmetry& other) const {
  WignerSymmetry w;
  w.t0 = t0 * other.t0;
  if (kind == SymmetryKind::Unknown || other.kind == SymmetryKind::Unknown)
    w.kind = SymmetryKind::Unknown;
  else
    w.kind = (kind == other.kind) ? SymmetryKind::Unitary : SymmetryKind::Antiunitary;
  w.tag = tag + "*" + other.tag;
  return w;
}

WignerSymmetry WignerSymmetry::inverse() const {
  WignerSymmetry w = *this;
  w.t0 = t0.transpose();
  w.angle = -angle;
  w.tag = "inv(" + tag + ")";
  return w;
}

WignerCertificate certify_wigner(const BlochModel& bm, const RMatrix& t0, int samples) {
  WignerCertificate c;
  const int n = bm.coherence_dim();
  const double scale = std::max(norm2(bm.l0), 1e-300);
  c.orthogonality = (t0.transpose() * t0 - RMatrix::Identity(n, n)).norm();
  c.commutator = (t0.transpose() * bm.l0 * t0 - bm.l0).norm() / scale;
  const double bn = bm.b.norm();
  c.b_defect = (t0 * bm.b - bm.b).norm() / (bn > 0 ? bn : 1.0);
  c.xss_defect = (t0 * bm.x_ss - bm.x_ss).norm();
  std::mt19937_64 rng(12345);
  c.min_state_eig = 1.0;
  for (int s = 0; s < samples; ++s) {
    RVector x = state_to_bloch(random_state(bm.dim(), rng), bm.basis);
    c.min_state_eig = std::min(c.min_state_eig, min_eigenvalue(bloch_to_rho(t0 * x, bm.basis)));
  }
  c.ok = c.orthogonality <= 1e-10 && c.commutator <= 1e-8 && c.b_defect <= 1e-8 &&
         c.xss_defect <= 1e-8 && c.min_state_eig >= -1e-8;
  return c;
}

SymmetryKind classify(const OperatorBasis& basis, const RMatrix& t0, double tol) {
  const int n = basis.traceless_count();
  double plus = 0.0, minus = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      RVector ei = RVector::Unit(n, i), ej = RVector::Unit(n, j);
      RVector lhs = basis.bracket(t0 * ei, t0 * ej);
      RVector rhs = t0 * basis.bracket(ei, ej);
      plus = std::max(plus, (lhs - rhs).norm());
      minus = std::max(minus, (lhs + rhs).norm());
    }
  if (plus <= tol) return SymmetryKind::Unitary;
  if (minus <= tol) return SymmetryKind::Antiunitary;
  return SymmetryKind::Unknown;
}

std::vector<WignerSymmetry> find_wigner_symmetries(const BlochModel& bm) {
  const int n = bm.coherence_dim();
  const double scale = std::max(norm2(bm.l0), 1e-300);
  std::vector<WignerSymmetry> out;

  // connected component: A = ad(h), [A, L0] = 0, A b = 0
  RMatrix sys(n * n + n, n);
  for (int i = 0; i < n; ++i) {
    RMatrix a = bm.basis.bracket_matrix(RVector::Unit(n, i));
    RMatrix comm = a * bm.l0 - bm.l0 * a;
    sys.col(i).head(n * n) = Eigen::Map<RVector>(comm.data(), n * n) / scale;
    sys.col(i).tail(n) = a * bm.b / std::max(bm.b.norm(), 1.0);
  }
  RMatrix hs = null_space(sys, 1e-9);
  std::vector<RMatrix> generators;
  for (Eigen::Index g = 0; g < hs.cols(); ++g) {
    RMatrix a = bm.basis.bracket_matrix(hs.col(g));
    Eigen::EigenSolver<RMatrix> es(a, false);
    double rad = es.eigenvalues().cwiseAbs().maxCoeff();
    if (rad <= 1e-12) continue;
    a /= rad;
    generators.push_back(a);
    WignerSymmetry w;
    w.generator = a;
    w.kind = SymmetryKind::Unitary;
    w = w.at_angle(M_PI / 3.0);
    w.tag = "rotation-generator" + std::to_string(g);
    if (certify_wigner(bm, w.t0).ok) out.push_back(w);
  }

  auto in_connected = [&](const RMatrix& t) {
    if (generators.size() != 1) return false;
    for (int k = 0; k < 360; ++k) {
      RMatrix r = (2.0 * M_PI * k / 360.0 * generators[0]).exp();
      if ((r - t).norm() < 1e-9) return true;
    }
    return false;
  };

  // discrete: signed permutations (n <= 5) or signed diagonals
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const bool permute_axes = n <= 5;
  const long long nsigns = n <= 15 ? (1LL << n) : 0;
  std::vector<RMatrix> seen;
  do {
    for (long long mask = 0; mask < nsigns; ++mask) {
      RMatrix t = RMatrix::Zero(n, n);
      for (int i = 0; i < n; ++i) t(perm[i], i) = (mask >> i) & 1 ? -1.0 : 1.0;
      if ((t - RMatrix::Identity(n, n)).norm() < 1e-12) continue;
      if ((t.transpose() * bm.l0 * t - bm.l0).norm() > 1e-8 * scale) continue;
      if ((t * bm.b - bm.b).norm() > 1e-8 * std::max(bm.b.norm(), 1e-300)) continue;
      if (!certify_wigner(bm, t).ok) continue;
      if (in_connected(t)) continue;
      WignerSymmetry w;
      w.t0 = t;
      w.kind = classify(bm.basis, t);
      std::ostringstream tag;
      tag << "signed-permutation(";
      for (int i = 0; i < n; ++i) tag << (i ? "," : "") << ((mask >> i) & 1 ? "-" : "+") << perm[i];
      tag << ")";
      w.tag = tag.str();
      out.push_back(std::move(w));
    }
  } while (permute_axes && std::next_permutation(perm.begin(), perm.end()));
  return out;
}

JointReport check_joint(const InvariantSubspace& sub, const WignerSymmetry& w, const BlochModel& bm) {
  JointReport r;
  const RMatrix& q = sub.basis_i0;
  const RMatrix& rr = sub.basis_r0;
  const double scale = std::max(norm2(bm.l0), 1e-300);
  double tir = rr.cols() ? (q.transpose() * w.t0 * rr).norm() : 0.0;
  double tri = rr.cols() ? (rr.transpose() * w.t0 * q).norm() : 0.0;
  r.off_diagonal = std::max(tir, tri);
  r.off_diagonal_zero = r.off_diagonal <= 1e-8;
  r.t_i0 = q.transpose() * w.t0 * q;
  const RMatrix li = q.transpose() * bm.l0 * q;
  Eigen::FullPivLU<RMatrix> lu(r.t_i0);
  if (lu.isInvertible()) {
    r.restricted_commutator = (lu.inverse() * li * r.t_i0 - li).norm() / scale;
    r.restricted_commutes = r.restricted_commutator <= 1e-8;
  } else {
    r.restricted_commutator = INFINITY;
  }
  r.xss_defect = (w.t0 * bm.x_ss - bm.x_ss).norm();
  r.fixes_steady_state = r.xss_defect <= 1e-8;
  r.full_wigner = certify_wigner(bm, w.t0).ok;
  return r;
}

Ensemble apply_wigner(const WignerSymmetry& w, const Ensemble& ens, const OperatorBasis& basis,
                      double tol) {
  Ensemble out = ens;
  for (auto& x : out.states) {
    x = w.t0 * x;
    double me = min_eigenvalue(bloch_to_rho(x, basis));
    if (me < -tol)
      throw Error(ErrorKind::SymmetryViolation,
                  "image state is not positive (min eigenvalue " + std::to_string(me) + ")");
  }
  return out;
}

CMatrix WignerOperator::apply(const CMatrix& op) const {
  return antiunitary ? CMatrix(u * op.conjugate() * u.adjoint()) : CMatrix(u * op * u.adjoint());
}

CVector WignerOperator::apply(const CVector& psi) const {
  return antiunitary ? CVector(u * psi.conjugate()) : CVector(u * psi);
}

WignerOperator wigner_operator(const OperatorBasis& basis, const WignerSymmetry& w) {
  const int d = basis.dim();
  const int n = basis.traceless_count();
  const CMatrix id = CMatrix::Identity(d, d);
  auto solve = [&](bool anti) -> std::optional<CMatrix> {
    CMatrix sys(n * d * d, d * d);
    for (int i = 0; i < n; ++i) {
      CMatrix image = CMatrix::Zero(d, d);
      for (int j = 0; j < n; ++j) image += w.t0(j, i) * basis.element(j);
      CMatrix src = anti ? CMatrix(basis.element(i).conjugate()) : basis.element(i);
      // vec(image U - U src) = (1 kron image - src^T kron 1) vec(U)
      sys.middleRows(i * d * d, d * d) =
          Eigen::kroneckerProduct(id, image).eval() - Eigen::kroneckerProduct(src.transpose(), id).eval();
    }
    CMatrix ns = null_space(sys, 1e-8);
    if (ns.cols() != 1) return std::nullopt;
    CMatrix u = unvec(ns.col(0), d);
    u /= std::sqrt((u.adjoint() * u).trace().real() / d);
    if ((u.adjoint() * u - id).norm() > 1e-8) return std::nullopt;
    return u;
  };
  std::vector<bool> order;
  if (w.kind == SymmetryKind::Antiunitary) order = {true};
  else if (w.kind == SymmetryKind::Unitary) order = {false};
  else order = {false, true};
  for (bool anti : order)
    if (auto u = solve(anti)) return {*u, anti};
  throw Error(ErrorKind::SymmetryViolation, "no operator realizes the coherence-space map");
}

}  // namespace preforge
