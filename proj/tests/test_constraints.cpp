#include <doctest.h>

#include "property_suites.hpp"

#include "helpers.hpp"
#include "preforge/catalog.hpp"
#include "preforge/constraints.hpp"
#include "preforge/error.hpp"
#include "preforge/solver.hpp"

using namespace preforge;

namespace {

MasterEquation random_me(int d, std::mt19937_64& rng) {
  return MasterEquation(testutil::random_hermitian(d, rng),
                        {testutil::random_matrix(d, d, rng), testutil::random_matrix(d, d, rng)});
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Parse;
}

void check_jacobian(const ConstraintSystem& cs, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.3);
  RVector p = RVector::NullaryExpr(cs.n_params(), [&] { return n(rng); });
  RVector r;
  RMatrix jac;
  cs.residual_and_jacobian(p, r, &jac);
  CHECK((r - cs.residual(p)).norm() < 1e-14);
  RMatrix fd(r.size(), p.size());
  const double h = 1e-6;
  for (int i = 0; i < p.size(); ++i) {
    RVector a = p, b = p;
    a(i) += h;
    b(i) -= h;
    fd.col(i) = (cs.residual(a) - cs.residual(b)) / (2 * h);
  }
  CHECK((jac - fd).norm() < 1e-6 * (1.0 + jac.norm()));
}

}  // namespace

TEST_SUITE("constraints") {

TEST_CASE("parameter and constraint counts") {
  BlochModel rf = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  ConstraintSystem k2 = build_full(rf, 2, TransitionGraph::cyclic(2));
  CHECK(k2.n_params() == 8);
  CHECK(k2.n_constraints() == 8);

  BlochModel ae = vectorize(catalog::absorption_emission(0.05, 1.0));
  RMatrix disc = RMatrix::Zero(3, 2);
  disc(0, 0) = disc(2, 1) = 1.0;
  ConstraintSystem k3 = build_subspace_reduced(ae, make_subspace(ae, disc), 3, TransitionGraph::cyclic(3));
  CHECK(k3.n_params() == 9);
  CHECK(k3.n_constraints() == 9);

  std::mt19937_64 rng(1);
  BlochModel q = vectorize(random_me(3, rng));
  ConstraintSystem k5 = build_full(q, 5, TransitionGraph::full(5));
  CHECK(k5.n_constraints() == 45);
  CHECK(k5.n_params() == 5 * 8 + 20);
}

TEST_CASE("heuristic minimum K, both rows of the table") {
  const int redit[] = {2, 4, 7, 11, 16};
  const int qudit[] = {2, 5, 10, 17, 26};
  for (int d = 2; d <= 6; ++d) {
    CHECK(heuristic_min_k(d, true) == redit[d - 2]);
    CHECK(heuristic_min_k(d, false) == qudit[d - 2]);
  }
}

TEST_CASE("residual-equivalence suite: 1000 random ensembles") {
  suites::Result r = suites::residual_equivalence(1000);
  CHECK(r.cases == 1000);
  CHECK(r.failures == 0);
  MESSAGE("worst deviation " << r.worst);
}

TEST_CASE("analytic Jacobians match finite differences for every structure") {
  std::mt19937_64 rng(4);
  BlochModel rf = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  check_jacobian(build_full(rf, 3, TransitionGraph::cyclic(3)), rng);
  auto subs = find_invariant_subspaces(rf, 2, 2);
  check_jacobian(build_subspace_reduced(rf, subs[0], 3, TransitionGraph::cyclic(3)), rng);
  WignerSymmetry w = find_wigner_symmetries(rf)[0];
  check_jacobian(build_wigner_reduced(rf, w, {1, 0}, 2, TransitionGraph::cyclic(2)), rng);
  RMatrix disc = RMatrix::Zero(3, 2);
  disc(1, 0) = disc(2, 1) = 1.0;
  check_jacobian(build_joint(rf, make_subspace(rf, disc), w, {0, 1, 2}, 3, TransitionGraph::cyclic(3)), rng);
  BlochModel q = vectorize(random_me(3, rng));
  check_jacobian(build_full(q, 4, TransitionGraph::full(4)), rng);
}

TEST_CASE("pack and unpack are inverse on structured ensembles") {
  BlochModel rf = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  ConstraintSystem cs = build_full(rf, 2, TransitionGraph::cyclic(2));
  for (const auto& e : analytic_k2(rf).ensembles) {
    Ensemble back = cs.unpack(cs.pack(e));
    CHECK(ensemble_distance(back, e, 1.0) < 1e-12);
    CHECK(cs.residual(cs.pack(e)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Wigner reduction keeps one representative per orbit") {
  BlochModel ae = vectorize(catalog::absorption_emission(0.05, 1.0));
  WignerSymmetry gen;
  for (const auto& w : find_wigner_symmetries(ae))
    if (w.generator) gen = w;
  REQUIRE(gen.generator);
  WignerSymmetry rot = gen.at_angle(2 * M_PI / 3);
  ConstraintSystem cs = build_wigner_reduced(ae, rot, {1, 2, 0}, 3, TransitionGraph::full(3));
  CHECK(cs.representatives().size() == 1);
  CHECK(cs.consistent());
  CHECK(cs.members()[0].basis.cols() == 3);  // T^3 = 1 fixes everything
  CHECK(cs.n_constraints() == 4);
}

TEST_CASE("symmetry-breaking rates make a structure inconsistent") {
  BlochModel rf = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  WignerSymmetry w = find_wigner_symmetries(rf)[0];
  ConstraintSystem cs = build_wigner_reduced(rf, w, {1, 0, 2}, 3, TransitionGraph::cyclic(3));
  CHECK_FALSE(cs.consistent());
  CHECK_FALSE(cs.note().empty());
}

TEST_CASE("assembly errors") {
  BlochModel rf = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  WignerSymmetry w = find_wigner_symmetries(rf)[0];
  CHECK(kind_of([&] { build_full(rf, 1, TransitionGraph::cyclic(1)); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { build_wigner_reduced(rf, w, {0, 0}, 2, TransitionGraph::cyclic(2)); }) ==
        ErrorKind::InvalidPermutation);
  CHECK(kind_of([&] { build_wigner_reduced(rf, w, {1, 2, 0}, 3, TransitionGraph::cyclic(3)); }) ==
        ErrorKind::InvalidPermutation);
  WignerSymmetry moved = w;
  moved.t0 = RMatrix(Eigen::Vector3d(1, -1, 1).asDiagonal());
  CHECK(kind_of([&] { build_wigner_reduced(rf, moved, {0, 1}, 2, TransitionGraph::cyclic(2)); }) ==
        ErrorKind::SymmetryViolation);
  CHECK(kind_of([&] { heuristic_min_k(1, false); }) == ErrorKind::InvalidDimension);
}

TEST_CASE("verify flags negative rates, impure members and disconnection") {
  BlochModel rf = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  Ensemble e = analytic_k2(rf).ensembles[0];
  Ensemble neg = e;
  neg.kappa(0, 1) = -0.1;
  CHECK_FALSE(verify(rf, neg).pass);
  Ensemble cut = e;
  cut.kappa(0, 1) = 0.0;
  VerificationReport r = verify(rf, cut);
  CHECK_FALSE(r.connected);
  CHECK_FALSE(r.pass);
  Ensemble mixed = e;
  mixed.states[0] *= 0.9;
  CHECK(verify(rf, mixed).max_purity_defect > 1e-3);
  CHECK(verify(rf, e, 1e-10).pass);
  CHECK(verify(rf, e).average_defect < 1e-12);
}

}
