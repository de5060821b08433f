#include "preforge/trajectory.hpp"

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "preforge/error.hpp"
#include "preforge/least_squares.hpp"
#include "preforge/spectrum.hpp"

namespace preforge {

namespace {

struct Kernel {
  std::vector<CMatrix> no_jump;             // 1 - i dt H'_eff per member
  std::vector<std::vector<CMatrix>> jumps;  // c'_m per member
  double max_rate = 0.0;
};

Kernel make_kernel(const MasterEquation& me, const AdaptiveScheme& scheme, double dt) {
  Kernel k;
  const int d = me.dim();
  for (const auto& s : scheme.settings) {
    Unravelled un = apply_unravelling(me, s);
    k.no_jump.push_back(CMatrix::Identity(d, d) - kI * dt * un.effective);
    CMatrix total = CMatrix::Zero(d, d);
    for (const auto& c : un.jumps) total += c.adjoint() * c;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(total, Eigen::EigenvaluesOnly);
    k.max_rate = std::max(k.max_rate, es.eigenvalues().maxCoeff());
    k.jumps.push_back(un.jumps);
  }
  if (dt * k.max_rate > 0.05)
    throw Error(ErrorKind::InvalidConfig,
                "dt * max jump rate = " + std::to_string(dt * k.max_rate) + " exceeds 0.05");
  return k;
}

// One step; returns the detector that clicked or -1.
int step(const Kernel& ker, int label, double dt, CVector& psi, CVector& tmp, double u,
         CVector* pre = nullptr) {
  const auto& jumps = ker.jumps[label];
  double acc = 0.0;
  for (std::size_t m = 0; m < jumps.size(); ++m) {
    tmp.noalias() = jumps[m] * psi;
    acc += tmp.squaredNorm() * dt;
    if (u < acc) {
      if (pre) *pre = psi;
      psi = tmp / tmp.norm();
      return static_cast<int>(m);
    }
  }
  tmp.noalias() = ker.no_jump[label] * psi;
  psi = tmp / tmp.norm();
  return -1;
}

}  // namespace

TrajectoryStats simulate(const MasterEquation& me, const AdaptiveScheme& scheme, const Ensemble& ens,
                         const TrajectoryConfig& cfg) {
  if (cfg.n_jumps <= 0 && cfg.t_max <= 0)
    throw Error(ErrorKind::InvalidConfig, "set n_jumps or t_max");
  if (scheme.size() != ens.size()) throw Error(ErrorKind::Shape, "scheme and ensemble sizes differ");
  const OperatorBasis basis = build_basis(me.dim());
  double dt = cfg.dt;
  if (dt <= 0) dt = 1e-3 / std::max(norm2(vectorize(me, basis).l0), 1e-300);
  const Kernel ker = make_kernel(me, scheme, dt);
  const std::vector<CVector> phi = state_vectors(ens, basis);
  const int k = ens.size();
  const int d = me.dim();

  TrajectoryStats st;
  st.dt = dt;
  st.occupancy = RVector::Zero(k);
  st.jump_counts = RMatrix::Zero(k, k);
  st.self_loops = RVector::Zero(k);

  std::mt19937_64 rng(mix_seed(cfg.rng_seed, 0));
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  CVector psi = phi[0];
  CVector tmp(d);
  CVector before(d);
  int label = 0;
  long long jumps_seen = 0;
  long long steps = 0;
  double t = 0.0;

  auto drift = [&](const CVector& v) {
    const double f = std::norm(phi[label].dot(v));
    return d * std::sqrt(std::max(0.0, 1.0 - f));
  };
  auto check_drift = [&](const CVector& v) {
    const double dr = drift(v);
    st.max_state_drift = std::max(st.max_state_drift, dr);
    if (dr > cfg.drift_limit)
      throw Error(ErrorKind::RealizationFailure,
                  "state drifted " + std::to_string(dr) + " from member " + std::to_string(label) +
                      " after " + std::to_string(jumps_seen) + " jumps");
  };

  while (true) {
    if (cfg.n_jumps > 0 && jumps_seen - cfg.burn_in >= cfg.n_jumps) break;
    if (cfg.t_max > 0 && t >= cfg.t_max) break;
    const bool counting = jumps_seen >= cfg.burn_in;
    const int m = step(ker, label, dt, psi, tmp, ud(rng), &before);
    t += dt;
    ++steps;
    if (m < 0) {
      if (counting) st.occupancy(label) += dt;
      if (cfg.record == RecordPolicy::Strided && steps % cfg.stride == 0) check_drift(psi);
      continue;
    }
    check_drift(before);
    const int to = scheme.jump_map[label][m];
    if (to < 0)
      throw Error(ErrorKind::RealizationFailure, "detector " + std::to_string(m) +
                                                     " clicked in member " + std::to_string(label) +
                                                     " where it should be dark");
    if (counting) {
      st.occupancy(label) += dt;
      if (to == label)
        st.self_loops(label) += 1.0;
      else {
        st.jump_counts(to, label) += 1.0;
        ++st.n_jumps;
      }
      if (cfg.log_events) st.events.push_back({t, m, label, to});
    }
    if (to != label) ++jumps_seen;
    label = to;
    check_drift(psi);
  }
  st.time = st.occupancy.sum();
  if (st.time > 0) st.occupancy /= st.time;
  return st;
}

UnconditionalReport unconditional_check(const MasterEquation& me, const AdaptiveScheme& scheme,
                                        const UnconditionalConfig& cfg) {
  const int d = me.dim();
  const Kernel ker = make_kernel(me, scheme, cfg.dt);
  CVector psi0 = cfg.psi0.size() ? CVector(cfg.psi0 / cfg.psi0.norm()) : CVector(CVector::Unit(d, 0));
  const CMatrix rho0 = psi0 * psi0.adjoint();
  const Superoperator lv = lindbladian(me);

  std::vector<long long> marks;
  for (double t : cfg.times) marks.push_back(std::llround(t / cfg.dt));
  const long long last = marks.empty() ? 0 : *std::max_element(marks.begin(), marks.end());
  const int nt = static_cast<int>(marks.size());

  // fixed chunking keeps the floating-point sum independent of threads
  const int chunk = 256;
  const int nchunks = (cfg.n_trajectories + chunk - 1) / chunk;
  std::vector<std::vector<CMatrix>> partial(nchunks, std::vector<CMatrix>(nt, CMatrix::Zero(d, d)));

  auto run_chunk = [&](int c) {
    CVector tmp(d);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int tr = c * chunk; tr < std::min(cfg.n_trajectories, (c + 1) * chunk); ++tr) {
      std::mt19937_64 rng(mix_seed(cfg.rng_seed, tr));
      CVector psi = psi0;
      int label = 0;
      for (long long s = 0; s <= last; ++s) {
        for (int i = 0; i < nt; ++i)
          if (marks[i] == s) partial[c][i] += psi * psi.adjoint();
        if (s == last) break;
        const int m = step(ker, label, cfg.dt, psi, tmp, ud(rng));
        if (m >= 0) {
          const int to = scheme.jump_map[label][m];
          if (to >= 0) label = to;
        }
      }
    }
  };
  if (cfg.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < nchunks; ++c) run_chunk(c);
  } else {
    for (int c = 0; c < nchunks; ++c) run_chunk(c);
  }

  UnconditionalReport rep;
  rep.times = cfg.times;
  rep.n_trajectories = cfg.n_trajectories;
  rep.tolerance = cfg.tolerance;
  for (int i = 0; i < nt; ++i) {
    CMatrix avg = CMatrix::Zero(d, d);
    for (int c = 0; c < nchunks; ++c) avg += partial[c][i];
    avg /= static_cast<double>(std::max(cfg.n_trajectories, 1));
    const double t = marks[i] * cfg.dt;
    CMatrix exact = unvec((lv.matrix() * t).exp() * vec(rho0), d);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(0.5 * ((avg - exact) + (avg - exact).adjoint())),
                                              Eigen::EigenvaluesOnly);
    const double dist = 0.5 * es.eigenvalues().cwiseAbs().sum();
    rep.distances.push_back(dist);
    rep.max_distance = std::max(rep.max_distance, dist);
  }
  rep.pass = rep.max_distance <= cfg.tolerance;
  return rep;
}

}  // namespace preforge
