#include "preforge/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "preforge/error.hpp"
#include "preforge/spectrum.hpp"

namespace preforge {

RVector Ensemble::average() const {
  RVector avg = RVector::Zero(states.empty() ? 0 : states[0].size());
  for (int k = 0; k < size(); ++k) avg += occupations(k) * states[k];
  return avg;
}

RVector stationary_distribution(const RMatrix& kappa) {
  const int k = static_cast<int>(kappa.rows());
  RMatrix q = kappa;
  q.diagonal().setZero();
  for (int c = 0; c < k; ++c) q(c, c) = -q.col(c).sum();
  RMatrix a(k + 1, k);
  a.topRows(k) = q;
  a.row(k).setOnes();
  RVector rhs = RVector::Zero(k + 1);
  rhs(k) = 1.0;
  return a.colPivHouseholderQr().solve(rhs);
}

bool strongly_connected(const RMatrix& kappa, double threshold) {
  const int k = static_cast<int>(kappa.rows());
  if (k <= 1) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(k, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int u = 0; u < k; ++u) {
        double rate = forward ? kappa(u, v) : kappa(v, u);
        if (u != v && rate > threshold && !seen[u]) {
          seen[u] = 1;
          stack.push_back(u);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach(true) && reach(false);
}

Ensemble make_ensemble(std::vector<RVector> states, RMatrix kappa, double clamp) {
  Ensemble e;
  e.states = std::move(states);
  if (kappa.rows() != e.size() || kappa.cols() != e.size())
    throw Error(ErrorKind::Shape, "kappa must be K x K");
  kappa.diagonal().setZero();
  for (Eigen::Index i = 0; i < kappa.size(); ++i)
    if (std::abs(kappa.data()[i]) < clamp) kappa.data()[i] = 0.0;
  e.kappa = std::move(kappa);
  e.occupations = stationary_distribution(e.kappa);
  return e;
}

Ensemble permute(const Ensemble& e, const std::vector<int>& perm) {
  Ensemble out;
  const int k = e.size();
  out.states.resize(k);
  out.kappa.resize(k, k);
  out.occupations.resize(k);
  for (int i = 0; i < k; ++i) {
    out.states[i] = e.states[perm[i]];
    out.occupations(i) = e.occupations(perm[i]);
    for (int j = 0; j < k; ++j) out.kappa(i, j) = e.kappa(perm[i], perm[j]);
  }
  return out;
}

std::vector<CVector> state_vectors(const Ensemble& e, const OperatorBasis& basis) {
  std::vector<CVector> out;
  for (const auto& x : e.states) out.push_back(bloch_to_state(x, basis));
  return out;
}

TransitionGraph TransitionGraph::cyclic(int k) {
  TransitionGraph g;
  g.k = k;
  g.name = "cyclic";
  for (int i = 0; i < k; ++i) g.edges.push_back({(i + 1) % k, i});
  if (k == 2) g.edges.resize(2);
  return g;
}

TransitionGraph TransitionGraph::full(int k) {
  TransitionGraph g;
  g.k = k;
  g.name = "full";
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) g.edges.push_back({j, i});
  return g;
}

bool TransitionGraph::contains(int j, int k) const {
  return std::find(edges.begin(), edges.end(), std::make_pair(j, k)) != edges.end();
}

const char* to_string(StructureKind s) {
  switch (s) {
    case StructureKind::Full: return "full";
    case StructureKind::Subspace: return "subspace";
    case StructureKind::Wigner: return "wigner";
    case StructureKind::Joint: return "joint";
  }
  return "unknown";
}

ConstraintSystem ConstraintSystem::assemble(const BlochModel& bm, int k, const TransitionGraph& graph,
                                            StructureKind kind, const RMatrix* subspace,
                                            const RMatrix* t0, const std::vector<int>* perm) {
  if (k < 2) throw Error(ErrorKind::InvalidConfig, "ensemble size K must be >= 2");
  if (graph.k != k) throw Error(ErrorKind::InvalidConfig, "transition graph size differs from K");
  const int n = bm.coherence_dim();
  ConstraintSystem cs;
  cs.bm_ = bm;
  cs.graph_ = graph;
  cs.structure_ = kind;

  const RMatrix span = subspace ? *subspace : RMatrix::Identity(n, n);
  const RMatrix t = t0 ? *t0 : RMatrix::Identity(n, n);
  std::vector<int> p(k);
  std::iota(p.begin(), p.end(), 0);
  if (perm) p = *perm;

  {
    std::vector<int> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < k; ++i)
      if (static_cast<int>(sorted.size()) != k || sorted[i] != i)
        throw Error(ErrorKind::InvalidPermutation, "perm is not a permutation of the K members");
  }
  if (t0 && (t * bm.x_ss - bm.x_ss).norm() > 1e-8)
    throw Error(ErrorKind::SymmetryViolation, "symmetry does not fix the steady state");

  int order = 0;
  {
    RMatrix pw = RMatrix::Identity(n, n);
    for (int m = 1; m <= 1000; ++m) {
      pw = t * pw;
      if ((pw - RMatrix::Identity(n, n)).norm() < 1e-9) {
        order = m;
        break;
      }
    }
  }
  const bool perm_identity = std::is_sorted(p.begin(), p.end());

  // orbits
  cs.members_.assign(k, Member{});
  std::vector<char> seen(k, 0);
  int param = 0;
  std::vector<RMatrix> rep_basis(k);
  for (int i = 0; i < k; ++i) {
    if (seen[i]) continue;
    std::vector<int> orbit{i};
    seen[i] = 1;
    for (int j = p[i]; j != i; j = p[j]) {
      orbit.push_back(j);
      seen[j] = 1;
    }
    const int len = static_cast<int>(orbit.size());
    if (order == 0 && !perm_identity)
      throw Error(ErrorKind::InvalidPermutation, "symmetry has no finite order; only the identity permutation applies");
    if (order > 0 && order % len != 0 && !perm_identity)
      throw Error(ErrorKind::InvalidPermutation,
                  "orbit length " + std::to_string(len) + " does not divide the symmetry order " +
                      std::to_string(order));
    RMatrix b = span;
    if (t0) {
      RMatrix tl = RMatrix::Identity(n, n);
      for (int m = 0; m < len; ++m) tl = t * tl;
      RMatrix fix = null_space(RMatrix((tl - RMatrix::Identity(n, n)) * span), 1e-9);
      b = span * fix;
    }
    cs.reps_.push_back(i);
    RMatrix tm = RMatrix::Identity(n, n);
    for (int m = 0; m < len; ++m) {
      Member& mem = cs.members_[orbit[m]];
      mem.rep = i;
      mem.power = m;
      mem.offset = bm.x_ss;
      mem.basis = tm * b;
      mem.param_offset = param;
      tm = t * tm;
    }
    if (b.cols() == 0) {
      cs.consistent_ = false;
      cs.note_ = "a representative is confined to the steady state, which is not pure";
    }
    param += static_cast<int>(b.cols());
  }
  cs.first_rate_param_ = param;

  // rate orbits: kappa_{P j, P k} = kappa_{j k}
  std::vector<std::pair<int, int>> assigned;
  RMatrix support = RMatrix::Zero(k, k);
  bool dropped = false;
  for (const auto& e : graph.edges) {
    if (std::find(assigned.begin(), assigned.end(), e) != assigned.end()) continue;
    std::vector<std::pair<int, int>> orbit{e};
    for (auto f = std::make_pair(p[e.first], p[e.second]); f != e; f = {p[f.first], p[f.second]})
      orbit.push_back(f);
    for (const auto& f : orbit) assigned.push_back(f);
    bool ok = std::all_of(orbit.begin(), orbit.end(),
                          [&](const auto& f) { return graph.contains(f.first, f.second); });
    if (!ok) {
      dropped = true;
      continue;
    }
    for (const auto& f : orbit) {
      cs.rate_edges_.push_back({f, param});
      support(f.first, f.second) = 1.0;
    }
    ++param;
  }
  cs.n_params_ = param;
  cs.n_constraints_ = 0;
  for (int r : cs.reps_) cs.n_constraints_ += static_cast<int>(cs.members_[r].basis.cols()) + 1;
  if (!strongly_connected(support, 0.5)) {
    cs.consistent_ = false;
    cs.note_ = std::string(dropped ? "the permutation maps allowed transitions outside the " : "the ") +
               graph.name + " graph, leaving rates that cannot be strongly connected";
  }
  return cs;
}

RVector ConstraintSystem::residual(const RVector& p) const {
  RVector r;
  residual_and_jacobian(p, r, nullptr);
  return r;
}

void ConstraintSystem::residual_and_jacobian(const RVector& p, RVector& r, RMatrix* jac) const {
  const int kk = k();
  std::vector<RVector> x(kk);
  for (int m = 0; m < kk; ++m) {
    const Member& mem = members_[m];
    x[m] = mem.offset + mem.basis * p.segment(mem.param_offset, mem.basis.cols());
  }
  r.resize(n_constraints_);
  if (jac) jac->setZero(n_constraints_, n_params_);
  const double r2 = bm_.basis.pure_radius_sq();
  int row = 0;
  for (int rep : reps_) {
    const Member& mr = members_[rep];
    const RMatrix& br = mr.basis;
    const int nb = static_cast<int>(br.cols());
    RVector full = bm_.l0 * x[rep] + bm_.b;
    RMatrix dself = bm_.l0;
    for (const auto& [edge, idx] : rate_edges_) {
      if (edge.second != rep) continue;
      const int j = edge.first;
      const double kap = p(idx);
      full -= kap * (x[j] - x[rep]);
      if (jac) {
        dself += kap * RMatrix::Identity(dself.rows(), dself.cols());
        const Member& mj = members_[j];
        jac->block(row, mj.param_offset, nb, mj.basis.cols()) -= kap * br.transpose() * mj.basis;
        jac->block(row, idx, nb, 1) -= br.transpose() * (x[j] - x[rep]);
      }
    }
    r.segment(row, nb) = br.transpose() * full;
    if (jac) jac->block(row, mr.param_offset, nb, nb) += br.transpose() * dself * br;
    r(row + nb) = x[rep].squaredNorm() - r2;
    if (jac) jac->block(row + nb, mr.param_offset, 1, nb) += 2.0 * x[rep].transpose() * br;
    row += nb + 1;
  }
}

Ensemble ConstraintSystem::unpack(const RVector& p) const {
  std::vector<RVector> x(k());
  for (int m = 0; m < k(); ++m) {
    const Member& mem = members_[m];
    x[m] = mem.offset + mem.basis * p.segment(mem.param_offset, mem.basis.cols());
  }
  RMatrix kap = RMatrix::Zero(k(), k());
  for (const auto& [edge, idx] : rate_edges_) kap(edge.first, edge.second) = p(idx);
  return make_ensemble(std::move(x), std::move(kap));
}

RVector ConstraintSystem::pack(const Ensemble& e) const {
  if (e.size() != k()) throw Error(ErrorKind::Shape, "ensemble size differs from system K");
  RVector p = RVector::Zero(n_params_);
  for (int rep : reps_) {
    const Member& mem = members_[rep];
    p.segment(mem.param_offset, mem.basis.cols()) = mem.basis.transpose() * (e.states[rep] - mem.offset);
  }
  for (const auto& [edge, idx] : rate_edges_) p(idx) = e.kappa(edge.first, edge.second);
  return p;
}

ConstraintSystem build_full(const BlochModel& bm, int k, const TransitionGraph& graph) {
  return ConstraintSystem::assemble(bm, k, graph, StructureKind::Full, nullptr, nullptr, nullptr);
}

ConstraintSystem build_subspace_reduced(const BlochModel& bm, const InvariantSubspace& sub, int k,
                                        const TransitionGraph& graph) {
  if (sub.witness.size() == 0)
    throw Error(ErrorKind::InfeasibleSubspace, "subspace has no pure-state witness");
  return ConstraintSystem::assemble(bm, k, graph, StructureKind::Subspace, &sub.basis_i0, nullptr,
                                    nullptr);
}

ConstraintSystem build_wigner_reduced(const BlochModel& bm, const WignerSymmetry& w,
                                      const std::vector<int>& perm, int k,
                                      const TransitionGraph& graph) {
  if (static_cast<int>(perm.size()) != k)
    throw Error(ErrorKind::InvalidPermutation, "perm length differs from K");
  return ConstraintSystem::assemble(bm, k, graph, StructureKind::Wigner, nullptr, &w.t0, &perm);
}

ConstraintSystem build_joint(const BlochModel& bm, const InvariantSubspace& sub,
                             const WignerSymmetry& w, const std::vector<int>& perm, int k,
                             const TransitionGraph& graph) {
  if (static_cast<int>(perm.size()) != k)
    throw Error(ErrorKind::InvalidPermutation, "perm length differs from K");
  if (sub.witness.size() == 0)
    throw Error(ErrorKind::InfeasibleSubspace, "subspace has no pure-state witness");
  JointReport jr = check_joint(sub, w, bm);
  if (!jr.subspace_compatible())
    throw Error(ErrorKind::SymmetryViolation, "symmetry does not act within the subspace");
  return ConstraintSystem::assemble(bm, k, graph, StructureKind::Joint, &sub.basis_i0, &w.t0, &perm);
}

VerificationReport verify(const BlochModel& bm, const Ensemble& ens, double tol) {
  VerificationReport rep;
  rep.tol = tol;
  const int k = ens.size();
  const int d = bm.dim();
  std::vector<CMatrix> proj(k);
  for (int i = 0; i < k; ++i) proj[i] = bloch_to_rho(ens.states[i], bm.basis);
  rep.min_eigenvalue = INFINITY;
  rep.min_rate = INFINITY;
  for (int i = 0; i < k; ++i) {
    MemberReport m;
    CMatrix lp = bm.generator.dim() == d ? bm.generator.apply(proj[i])
                                         : bm.basis.compose(bm.l0 * ens.states[i] + bm.b, 0.0);
    CMatrix op = lp;
    RVector bl = bm.l0 * ens.states[i] + bm.b;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      op -= ens.kappa(j, i) * (proj[j] - proj[i]);
      bl -= ens.kappa(j, i) * (ens.states[j] - ens.states[i]);
      rep.min_rate = std::min(rep.min_rate, ens.kappa(j, i));
    }
    m.residual = op.norm();
    m.bloch_residual = bl.norm();
    m.purity_defect = std::abs(purity(proj[i]) - 1.0);
    m.min_eigenvalue = min_eigenvalue(proj[i]);
    rep.max_residual = std::max(rep.max_residual, m.residual);
    rep.max_bloch_residual = std::max(rep.max_bloch_residual, m.bloch_residual);
    rep.max_purity_defect = std::max(rep.max_purity_defect, m.purity_defect);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, m.min_eigenvalue);
    rep.members.push_back(m);
  }
  rep.connected = strongly_connected(ens.kappa);
  rep.occupations = stationary_distribution(ens.kappa);
  RVector avg = RVector::Zero(bm.coherence_dim());
  for (int i = 0; i < k; ++i) avg += rep.occupations(i) * ens.states[i];
  rep.average_defect = (avg - bm.x_ss).norm();
  rep.pass = rep.max_residual <= tol && rep.max_purity_defect <= tol && rep.min_eigenvalue >= -1e-9 &&
             rep.min_rate >= -1e-9 && rep.connected;
  return rep;
}

int heuristic_min_k(int d, bool real_subspace) {
  if (d < 2) throw Error(ErrorKind::InvalidDimension, "dimension must be >= 2");
  if (real_subspace) return (d * d - d + 2 + 1) / 2;
  return d * d - 2 * d + 2;
}

}  // namespace preforge
