#include <doctest.h>

#include "property_suites.hpp"

#include <map>
#include <random>

#include "preforge/catalog.hpp"
#include "preforge/error.hpp"
#include "preforge/solver.hpp"

using namespace preforge;

namespace {

// K=2 PRE on a real eigen-axis, from the chord geometry alone.
Ensemble chord_pre(const BlochModel& bm, const RVector& axis, double lambda) {
  RVector e = axis.normalized();
  const double p = bm.x_ss.dot(e);
  const double disc = std::sqrt(p * p - bm.x_ss.squaredNorm() + 1.0);
  const double eta1 = -p + disc, eta2 = p + disc;
  RMatrix kappa = RMatrix::Zero(2, 2);
  kappa(1, 0) = -lambda * eta1 / (eta1 + eta2);
  kappa(0, 1) = -lambda * eta2 / (eta1 + eta2);
  return make_ensemble({bm.x_ss + eta1 * e, bm.x_ss - eta2 * e}, kappa);
}

SolverConfig quick(int seeds, std::uint64_t rng = 1) {
  SolverConfig c;
  c.seeds = seeds;
  c.rng_seed = rng;
  return c;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("analytic K=2 PREs agree with the chord construction") {
  const double om = 0.18;
  BlochModel bm = vectorize(catalog::resonance_fluorescence(om, 1.0));
  const double s = std::sqrt(1.0 - 16 * om * om);
  std::vector<Ensemble> ref = {chord_pre(bm, Eigen::Vector3d(1, 0, 0), -0.5),
                               chord_pre(bm, Eigen::Vector3d(0, 1 + s, 4 * om), -0.75 + 0.25 * s),
                               chord_pre(bm, Eigen::Vector3d(0, 1 - s, 4 * om), -0.75 - 0.25 * s)};
  SolutionSet a = analytic_k2(bm);
  REQUIRE(a.ensembles.size() == 3);
  for (const auto& r : ref) {
    double best = 1e9;
    for (const auto& e : a.ensembles) best = std::min(best, ensemble_distance(e, r, 1.0));
    CHECK(best < 1e-10);
    CHECK(verify(bm, r, 1e-10).pass);
  }
}

TEST_CASE("numeric K=2 census reproduces the analytic set") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  SolutionSet n = solve_numeric(build_full(bm, 2, TransitionGraph::cyclic(2)), quick(64));
  SolutionSet a = analytic_k2(bm);
  REQUIRE(n.ensembles.size() == 3);
  for (const auto& e : n.ensembles) {
    double best = 1e9;
    for (const auto& r : a.ensembles) best = std::min(best, ensemble_distance(e, r, 1.0));
    CHECK(best < 1e-6);
    CHECK(verify(bm, e, 1e-10).pass);
  }
  CHECK(static_cast<int>(n.diagnostics.size()) == 64);
}

TEST_CASE("complex pair leaves a single K=2 PRE at Omega = 0.5") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.5, 1.0));
  CHECK(analytic_k2(bm).ensembles.size() == 1);
  CHECK(solve_numeric(build_full(bm, 2, TransitionGraph::cyclic(2)), quick(64)).ensembles.size() == 1);
}

TEST_CASE("serial and parallel multistart agree bitwise") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  ConstraintSystem cs = build_full(bm, 3, TransitionGraph::cyclic(3));
  SolverConfig a = quick(96), b = quick(96);
  a.execution = Execution::Serial;
  b.execution = Execution::Parallel;
  SolutionSet sa = solve_numeric(cs, a), sb = solve_numeric(cs, b);
  REQUIRE(sa.ensembles.size() == sb.ensembles.size());
  for (std::size_t i = 0; i < sa.ensembles.size(); ++i) {
    for (int k = 0; k < sa.ensembles[i].size(); ++k)
      CHECK((sa.ensembles[i].states[k] - sb.ensembles[i].states[k]).norm() == 0.0);
    CHECK((sa.ensembles[i].kappa - sb.ensembles[i].kappa).norm() == 0.0);
  }
  for (std::size_t i = 0; i < sa.diagnostics.size(); ++i) CHECK(sa.diagnostics[i].status == sb.diagnostics[i].status);
}

TEST_CASE("K=3 census is stable across seeds") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  ConstraintSystem cs = build_full(bm, 3, TransitionGraph::cyclic(3));
  for (std::uint64_t seed : {3ULL, 17ULL}) {
    SolutionSet s = solve_numeric(cs, quick(512, seed));
    CHECK(s.ensembles.size() == 8);
    int in_disc = 0;
    for (const auto& e : s.ensembles) {
      bool all = true;
      for (const auto& x : e.states) all = all && std::abs(x(0)) <= 1e-7;
      in_disc += all;
      CHECK(verify(bm, e, 1e-9).pass);
    }
    CHECK(in_disc == 4);
  }
}

TEST_CASE("start diagnostics cover every start with a known status") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  SolutionSet s = solve_numeric(build_full(bm, 3, TransitionGraph::cyclic(3)), quick(40));
  std::map<std::string, int> counts;
  for (const auto& d : s.diagnostics) counts[d.status]++;
  int total = 0;
  for (const auto& [k, v] : counts) {
    total += v;
    const bool known = k == "accepted" || k == "duplicate" || k == "not-converged" || k == "negative-rate" ||
                       k == "disconnected" || k == "not-positive" || k == "coincident-members" ||
                       k == "verify-failed";
    CHECK_MESSAGE(known, k);
  }
  CHECK(total == 40);
  CHECK(counts["accepted"] == static_cast<int>(s.ensembles.size()));
}

TEST_CASE("ensemble distance is permutation invariant and symmetric") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  auto a = analytic_k2(bm).ensembles;
  CHECK(ensemble_distance(a[0], permute(a[0], {1, 0}), 1.0) < 1e-15);
  CHECK(ensemble_distance(a[0], a[1], 1.0) == doctest::Approx(ensemble_distance(a[1], a[0], 1.0)));
  CHECK(ensemble_distance(a[0], a[1], 1.0) > 0.1);
}

TEST_CASE("dedup-idempotence suite: 1000 randomized lists") {
  suites::Result r = suites::dedup_idempotence(1000);
  CHECK(r.cases == 1000);
  CHECK(r.failures == 0);
  MESSAGE("worst deviation " << r.worst);
}

TEST_CASE("Wigner family: K=3 rates gamma_sigma/6, K=4 line") {
  const double gp = 0.05, gm = 1.0, gs = gp + gm;
  BlochModel bm = vectorize(catalog::absorption_emission(gp, gm));
  SolutionSet k3 = solve_wigner_family(bm, 3);
  REQUIRE(k3.ensembles.size() == 1);
  const Ensemble& e = k3.ensembles[0];
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k)
      if (j != k) CHECK(std::abs(e.kappa(j, k) - gs / 6) <= 1e-12);
  for (int j = 0; j < 3; ++j) CHECK(e.occupations(j) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  SolutionSet k4 = solve_wigner_family(bm, 4);
  REQUIRE(!k4.ensembles.empty());
  for (const auto& f : k4.ensembles) {
    CHECK(std::abs(f.kappa(1, 0) - f.kappa(3, 0)) <= 1e-12);
    CHECK(std::abs(f.kappa(1, 0) + f.kappa(2, 0) - gs / 4) <= 1e-12);
    CHECK(f.kappa(1, 0) > 0);
  }
  for (int k = 2; k <= 8; ++k)
    for (const auto& f : solve_wigner_family(bm, k).ensembles) CHECK(verify(bm, f, 1e-10).pass);

  BlochModel rf = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  CHECK_THROWS_AS(solve_wigner_family(rf, 3), Error);
}

TEST_CASE("v=0 disc census and family dedup") {
  BlochModel bm = vectorize(catalog::absorption_emission(0.05, 1.0));
  RMatrix disc = RMatrix::Zero(3, 2);
  disc(0, 0) = disc(2, 1) = 1.0;
  auto images = rotation_images(bm, disc);
  REQUIRE(!images.empty());
  for (const auto& t : images) CHECK(((RMatrix::Identity(3, 3) - disc * disc.transpose()) * t * disc).norm() < 1e-9);
  SolverConfig cfg = quick(128);
  cfg.family = images;
  SolutionSet s = solve_numeric(build_subspace_reduced(bm, make_subspace(bm, disc), 3, TransitionGraph::cyclic(3)), cfg);
  CHECK(s.ensembles.size() == 2);
}

TEST_CASE("existence scan locates the count change") {
  std::vector<double> grid = {0.04, 0.05, 0.06, 0.07};
  auto factory = [](double g) {
    BlochModel bm = vectorize(catalog::absorption_emission(g, 1.0));
    RMatrix disc = RMatrix::Zero(3, 2);
    disc(0, 0) = disc(2, 1) = 1.0;
    return ScanSystem{build_subspace_reduced(bm, make_subspace(bm, disc), 3, TransitionGraph::cyclic(3)),
                      rotation_images(bm, disc)};
  };
  ScanResult r = scan_existence(factory, grid, quick(96));
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[0].count == 2);
  CHECK(r.rows[3].count == 0);
  REQUIRE(r.thresholds.size() == 1);
  CHECK(r.thresholds[0] == doctest::Approx(0.055));
}

}
