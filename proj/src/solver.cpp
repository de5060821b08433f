#include "preforge/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "preforge/error.hpp"
#include "preforge/least_squares.hpp"
#include "preforge/spectrum.hpp"

namespace preforge {

namespace {

bool states_positive(const Ensemble& e, const OperatorBasis& basis, double tol) {
  if (basis.dim() == 2) return true;
  for (const auto& x : e.states)
    if (min_eigenvalue(bloch_to_rho(x, basis)) < -tol) return false;
  return true;
}

double min_member_gap(const Ensemble& e) {
  double gap = INFINITY;
  for (int i = 0; i < e.size(); ++i)
    for (int j = i + 1; j < e.size(); ++j) gap = std::min(gap, (e.states[i] - e.states[j]).norm());
  return gap;
}

}  // namespace

SolutionSet analytic_k2(const BlochModel& bm) {
  SolutionSet out;
  const Spectrum sp = eig_full(bm.l0);
  const double r2 = bm.basis.pure_radius_sq();
  for (const auto& c : sp.clusters) {
    if (!c.is_real(sp.tolerance)) continue;
    const double lambda = c.value.real();
    for (std::size_t vi = 0; vi < c.eigenvectors.size(); ++vi) {
      RVector e = c.eigenvectors[vi].real();
      e.normalize();
      // canonical orientation: first significant component positive
      for (Eigen::Index i = 0; i < e.size(); ++i)
        if (std::abs(e(i)) > 1e-9) {
          if (e(i) < 0) e = -e;
          break;
        }
      const double bb = bm.x_ss.dot(e);
      const double cc = bm.x_ss.squaredNorm() - r2;
      const double disc = bb * bb - cc;
      if (disc <= 0) continue;
      const double eta1 = -bb + std::sqrt(disc);
      const double eta2 = bb + std::sqrt(disc);
      RMatrix kap = RMatrix::Zero(2, 2);
      kap(1, 0) = -lambda * eta1 / (eta1 + eta2);
      kap(0, 1) = -lambda * eta2 / (eta1 + eta2);
      Ensemble ens = make_ensemble({bm.x_ss + eta1 * e, bm.x_ss - eta2 * e}, kap);
      if (!states_positive(ens, bm.basis, 1e-9)) continue;
      if (ens.kappa.minCoeff() < 0) continue;
      out.ensembles.push_back(std::move(ens));
      std::ostringstream tag;
      tag << "eigenvector of " << lambda;
      if (c.eigenvectors.size() > 1) tag << "; family over the degenerate eigenspace";
      out.family_tags.push_back(tag.str());
    }
  }
  return out;
}

SolutionSet solve_wigner_family(const BlochModel& bm, int k) {
  if (k < 2) throw Error(ErrorKind::InvalidConfig, "ensemble size K must be >= 2");
  const auto syms = find_wigner_symmetries(bm);
  const WignerSymmetry* rot = nullptr;
  for (const auto& s : syms)
    if (s.generator) {
      rot = &s;
      break;
    }
  if (!rot) throw Error(ErrorKind::AssumptionViolation, "model has no continuous azimuthal symmetry");
  const RMatrix& a = *rot->generator;
  RMatrix plane = orth(a);
  if (plane.cols() != 2)
    throw Error(ErrorKind::AssumptionViolation, "symmetry generator does not act on a single plane");
  RVector u = plane.col(0);
  RVector v = a * u;
  v.normalize();
  const double scale = std::max(norm2(bm.l0), 1e-300);
  const double ca = u.dot(bm.l0 * u);
  const double cb = v.dot(bm.l0 * u);
  if ((bm.l0 * u - ca * u - cb * v).norm() > 1e-8 * scale)
    throw Error(ErrorKind::AssumptionViolation, "L0 does not map the symmetry plane to itself");
  const double rc2 = bm.basis.pure_radius_sq() - bm.x_ss.squaredNorm();
  if (rc2 <= 0) return {};
  const double rc = std::sqrt(rc2);

  std::vector<RVector> states;
  std::vector<double> theta(k);
  for (int j = 0; j < k; ++j) {
    theta[j] = 2.0 * M_PI * j / k;
    states.push_back(bm.x_ss + rc * (std::cos(theta[j]) * u + std::sin(theta[j]) * v));
  }

  // columns j = 1..K-1: sum kappa_j (1 - cos) = -a, sum kappa_j sin = b
  RMatrix m(2, k - 1);
  for (int j = 1; j < k; ++j) {
    m(0, j - 1) = 1.0 - std::cos(theta[j]);
    m(1, j - 1) = std::sin(theta[j]);
  }
  RVector rhs(2);
  rhs << -ca, cb;
  const double eps = 1e-12 * scale;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (std::abs(m.data()[i]) < 1e-14) m.data()[i] = 0.0;

  std::vector<RVector> vertices;
  auto add_vertex = [&](RVector kap) {
    for (Eigen::Index i = 0; i < kap.size(); ++i) {
      if (kap(i) < -eps) return;
      if (kap(i) < eps) kap(i) = 0.0;
    }
    if ((m * kap - rhs).norm() > 1e-10 * scale) return;
    for (const auto& w : vertices)
      if ((w - kap).norm() <= 1e-10 * scale) return;
    vertices.push_back(kap);
  };
  for (int c = 0; c < k - 1; ++c) {
    const double nn = m.col(c).squaredNorm();
    if (nn == 0) continue;
    RVector kap = RVector::Zero(k - 1);
    kap(c) = m.col(c).dot(rhs) / nn;
    add_vertex(kap);
  }
  for (int c1 = 0; c1 < k - 1; ++c1)
    for (int c2 = c1 + 1; c2 < k - 1; ++c2) {
      Eigen::Matrix2d b2;
      b2 << m.col(c1), m.col(c2);
      if (std::abs(b2.determinant()) < 1e-12) continue;
      Eigen::Vector2d sol = b2.lu().solve(Eigen::Vector2d(rhs(0), rhs(1)));
      RVector kap = RVector::Zero(k - 1);
      kap(c1) = sol(0);
      kap(c2) = sol(1);
      add_vertex(kap);
    }

  std::vector<std::pair<RVector, std::string>> points;
  for (const auto& w : vertices) points.push_back({w, "vertex"});
  if (vertices.size() > 1) {
    RVector mean = RVector::Zero(k - 1);
    for (const auto& w : vertices) mean += w;
    points.push_back({mean / static_cast<double>(vertices.size()), "interior"});
  }

  SolutionSet out;
  {
    std::ostringstream note;
    note << "rate polytope: " << vertices.size() << " vertices; plane coefficients a=" << ca
         << " b=" << cb;
    out.notes.push_back(note.str());
  }
  for (const auto& [kv, kind] : points) {
    RMatrix kap = RMatrix::Zero(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 1; j < k; ++j) kap((i + j) % k, i) = kv(j - 1);
    if (!strongly_connected(kap)) continue;
    Ensemble ens = make_ensemble(states, kap);
    if (!states_positive(ens, bm.basis, 1e-9)) continue;
    out.ensembles.push_back(std::move(ens));
    out.family_tags.push_back("azimuthal rotation family (" + kind + ")");
  }
  return out;
}

double ensemble_distance(const Ensemble& a, const Ensemble& b, double kappa_scale,
                         const std::vector<RMatrix>& family) {
  if (a.size() != b.size()) return INFINITY;
  const int k = a.size();
  const int n = a.states.empty() ? 0 : static_cast<int>(a.states[0].size());
  std::vector<RMatrix> maps{RMatrix::Identity(n, n)};
  maps.insert(maps.end(), family.begin(), family.end());
  double best = INFINITY;
  std::vector<int> pi(k, -1);
  std::vector<char> used(k, 0);
  for (const auto& g : maps) {
    std::vector<RVector> ga(k);
    for (int i = 0; i < k; ++i) ga[i] = g * a.states[i];
    std::function<void(int, double)> rec = [&](int i, double cur) {
      if (cur >= best) return;
      if (i == k) {
        double kd = 0.0;
        for (int r = 0; r < k; ++r)
          for (int c = 0; c < k; ++c) kd = std::max(kd, std::abs(a.kappa(r, c) - b.kappa(pi[r], pi[c])));
        best = std::min(best, cur + kd / kappa_scale);
        return;
      }
      for (int j = 0; j < k; ++j) {
        if (used[j]) continue;
        used[j] = 1;
        pi[i] = j;
        rec(i + 1, std::max(cur, (ga[i] - b.states[j]).norm()));
        used[j] = 0;
      }
    };
    rec(0, 0.0);
  }
  return best;
}

std::vector<Ensemble> dedup(const std::vector<Ensemble>& in, double eps, double kappa_scale,
                            const std::vector<RMatrix>& family) {
  std::vector<Ensemble> out;
  for (const auto& e : in) {
    bool dup = false;
    for (const auto& f : out)
      if (ensemble_distance(e, f, kappa_scale, family) <= eps) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(e);
  }
  return out;
}

namespace {

std::vector<long long> key_of(const RVector& x) {
  std::vector<long long> key(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) key[i] = std::llround(x(i) * 1e7);
  return key;
}

}  // namespace

Ensemble canonical(const Ensemble& e) {
  std::vector<int> order(e.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key_of(e.states[a]) < key_of(e.states[b]); });
  return permute(e, order);
}

void canonical_sort(std::vector<Ensemble>& set) {
  for (auto& e : set) e = canonical(e);
  std::stable_sort(set.begin(), set.end(), [](const Ensemble& a, const Ensemble& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    for (int i = 0; i < a.size(); ++i) {
      auto ka = key_of(a.states[i]), kb = key_of(b.states[i]);
      if (ka != kb) return ka < kb;
    }
    for (Eigen::Index i = 0; i < a.kappa.size(); ++i) {
      long long x = std::llround(a.kappa.data()[i] * 1e7), y = std::llround(b.kappa.data()[i] * 1e7);
      if (x != y) return x < y;
    }
    return false;
  });
}

std::vector<RMatrix> rotation_images(const BlochModel& bm, const RMatrix& span) {
  std::vector<RMatrix> out;
  const int n = bm.coherence_dim();
  const RMatrix q = orth(span);
  const RMatrix perp = RMatrix::Identity(n, n) - q * q.transpose();
  for (const auto& w : find_wigner_symmetries(bm)) {
    if (!w.generator) continue;
    for (int deg = 1; deg < 360; ++deg) {
      RMatrix t = (deg * M_PI / 180.0 * *w.generator).exp();
      if ((perp * t * q).norm() > 1e-9) continue;
      bool seen = false;
      for (const auto& o : out)
        if ((o - t).norm() < 1e-9) seen = true;
      if (!seen) out.push_back(t);
    }
  }
  return out;
}

SolutionSet solve_numeric(const ConstraintSystem& cs, const SolverConfig& cfg) {
  if (cfg.tol <= 0 || cfg.seeds < 1) throw Error(ErrorKind::InvalidConfig, "tol must be > 0 and seeds >= 1");
  SolutionSet out;
  if (!cs.consistent()) {
    out.notes.push_back("system inconsistent: " + cs.note());
    return out;
  }
  const BlochModel& bm = cs.model();
  const double l0n = std::max(norm2(bm.l0), 1e-300);
  const double r2 = bm.basis.pure_radius_sq();
  const int np = cs.n_params();
  const int excess = np - cs.n_constraints();
  if (excess > 2) throw Error(ErrorKind::InvalidConfig, "system is underdetermined by more than two parameters");

  // pinned parameters and their grid values
  std::vector<int> pinned;
  for (int i = 0; i < std::max(excess, 0); ++i) pinned.push_back(i);
  std::vector<std::vector<double>> pin_values{{}};
  if (!pinned.empty()) {
    const double range = std::sqrt(r2) + bm.x_ss.norm();
    std::vector<double> grid(cfg.pin_grid);
    for (int g = 0; g < cfg.pin_grid; ++g) grid[g] = -range + (g + 0.5) * 2.0 * range / cfg.pin_grid;
    pin_values.clear();
    if (pinned.size() == 1)
      for (double v : grid) pin_values.push_back({v});
    else
      for (double v : grid)
        for (double w : grid) pin_values.push_back({v, w});
    std::ostringstream note;
    note << "underdetermined by " << excess << "; pinned parameter(s) over a grid of " << pin_values.size()
         << " values";
    out.notes.push_back(note.str());
  }
  const int per_point = pinned.empty() ? cfg.seeds
                                       : std::max(1, cfg.seeds / static_cast<int>(pin_values.size()));
  const int nstarts = per_point * static_cast<int>(pin_values.size());

  std::vector<std::optional<Ensemble>> found(nstarts);
  std::vector<StartRecord> records(nstarts);

  auto run_start = [&](int s) {
    std::mt19937_64 rng(mix_seed(cfg.rng_seed, s));
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(std::log(1e-2), std::log(10.0));
    RVector p0 = RVector::Zero(np);
    for (int rep : cs.representatives()) {
      const auto& mem = cs.members()[rep];
      const int nb = static_cast<int>(mem.basis.cols());
      if (nb == 0) continue;
      RVector z(nb);
      for (int i = 0; i < nb; ++i) z(i) = nd(rng);
      RVector dir = mem.basis * z;
      const double dn = dir.norm();
      z /= dn;
      dir /= dn;
      const double bb = mem.offset.dot(dir);
      const double disc = bb * bb - (mem.offset.squaredNorm() - r2);
      const double t = disc > 0 ? -bb + std::sqrt(disc) : std::sqrt(r2);
      p0.segment(mem.param_offset, nb) = t * z;
    }
    for (int i = cs.first_rate_param(); i < np; ++i) p0(i) = std::exp(ud(rng)) * l0n;
    const auto& pv = pin_values[s / per_point];
    for (std::size_t i = 0; i < pinned.size(); ++i) p0(pinned[i]) = pv[i];

    std::vector<int> free_idx;
    for (int i = 0; i < np; ++i)
      if (std::find(pinned.begin(), pinned.end(), i) == pinned.end()) free_idx.push_back(i);
    RVector base = p0;
    auto expand = [&](const RVector& f) {
      RVector p = base;
      for (std::size_t i = 0; i < free_idx.size(); ++i) p(free_idx[i]) = f(i);
      return p;
    };
    ResidualFn fn = [&](const RVector& f, RVector& r, RMatrix* jac) {
      if (!jac) {
        cs.residual_and_jacobian(expand(f), r, nullptr);
        return;
      }
      RMatrix full;
      cs.residual_and_jacobian(expand(f), r, &full);
      jac->resize(r.size(), free_idx.size());
      for (std::size_t i = 0; i < free_idx.size(); ++i) jac->col(i) = full.col(free_idx[i]);
    };
    RVector f0(free_idx.size());
    for (std::size_t i = 0; i < free_idx.size(); ++i) f0(i) = p0(free_idx[i]);
    LmOptions opt;
    opt.tol = cfg.tol;
    opt.max_iter = cfg.max_iter;
    opt.max_param = 1e4 * (1.0 + l0n + std::sqrt(r2));
    LmResult res = levenberg_marquardt(fn, f0, opt);

    StartRecord& rec = records[s];
    rec.start = s;
    rec.iterations = res.iterations;
    rec.residual = res.max_residual;
    rec.converged = res.converged;
    if (!res.converged) {
      rec.status = "not-converged";
      return;
    }
    RVector p = expand(res.params);
    for (int i = cs.first_rate_param(); i < np; ++i) {
      if (p(i) < -1e-6) {
        rec.status = "negative-rate";
        return;
      }
      if (p(i) < 1e-9) p(i) = 0.0;
    }
    Ensemble ens = cs.unpack(p);
    if (!strongly_connected(ens.kappa)) {
      rec.status = "disconnected";
      return;
    }
    if (!states_positive(ens, bm.basis, 1e-9)) {
      rec.status = "not-positive";
      return;
    }
    if (min_member_gap(ens) < 1e-6) {
      rec.status = "coincident-members";
      return;
    }
    if (!verify(bm, ens, 10.0 * cfg.tol * std::max(1.0, l0n)).pass) {
      rec.status = "verify-failed";
      return;
    }
    rec.status = "accepted";
    found[s] = std::move(ens);
  };

  if (cfg.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < nstarts; ++s) run_start(s);
  } else {
    for (int s = 0; s < nstarts; ++s) run_start(s);
  }

  std::vector<Ensemble> kept;
  for (int s = 0; s < nstarts; ++s) {
    if (!found[s]) continue;
    bool dup = false;
    for (const auto& e : kept)
      if (ensemble_distance(*found[s], e, l0n, cfg.family) <= cfg.dedup_eps) {
        dup = true;
        break;
      }
    if (dup)
      records[s].status = "duplicate";
    else
      kept.push_back(*found[s]);
  }
  canonical_sort(kept);
  out.ensembles = std::move(kept);
  out.family_tags.assign(out.ensembles.size(), cfg.family.empty() ? "" : "up to supplied symmetry images");
  out.diagnostics = std::move(records);
  return out;
}

ScanResult scan_existence(const std::function<ScanSystem(double)>& factory,
                          const std::vector<double>& grid, const SolverConfig& cfg) {
  ScanResult out;
  for (double v : grid) {
    ScanRow row;
    row.value = v;
    try {
      ScanSystem sys = factory(v);
      SolverConfig c = cfg;
      c.family = sys.family;
      SolutionSet s = solve_numeric(sys.cs, c);
      row.count = static_cast<int>(s.ensembles.size());
      if (!s.notes.empty()) row.note = s.notes.front();
    } catch (const Error& e) {
      row.count = 0;
      row.note = std::string(to_string(e.kind())) + ": " + e.what();
    }
    out.rows.push_back(row);
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (out.rows[i].count != out.rows[i - 1].count)
      out.thresholds.push_back(0.5 * (out.rows[i].value + out.rows[i - 1].value));
  return out;
}

}  // namespace preforge
