#include <doctest.h>

#include "property_suites.hpp"

#include "helpers.hpp"
#include "preforge/catalog.hpp"
#include "preforge/error.hpp"
#include "preforge/model.hpp"

using namespace preforge;

namespace {

MasterEquation random_me(int d, int l, std::mt19937_64& rng) {
  std::vector<CMatrix> cs;
  for (int i = 0; i < l; ++i) cs.push_back(testutil::random_matrix(d, d, rng));
  return MasterEquation(testutil::random_hermitian(d, rng), cs);
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

}  // namespace

TEST_SUITE("model") {

TEST_CASE("vectorized generator matches the direct GKSL form") {
  std::mt19937_64 rng(3);
  for (int d = 2; d <= 4; ++d) {
    MasterEquation me = random_me(d, 2, rng);
    Superoperator l = lindbladian(me);
    for (int t = 0; t < 5; ++t) {
      CMatrix rho = random_density(d, rng);
      CHECK((l.apply(rho) - testutil::gksl(me.hamiltonian(), me.lindblads(), rho)).norm() < 1e-11);
    }
  }
}

TEST_CASE("traced Lindblad operators are shifted without changing the generator") {
  std::mt19937_64 rng(4);
  const int d = 3;
  CMatrix h = testutil::random_hermitian(d, rng);
  CMatrix c = testutil::random_matrix(d, d, rng) + cplx(0.7, -0.2) * CMatrix::Identity(d, d);
  MasterEquation me(h, {c});
  CHECK(!me.warnings().empty());
  CHECK(std::abs(me.lindblad(0).trace()) < 1e-12);
  CMatrix rho = random_density(d, rng);
  CHECK((lindbladian(me).apply(rho) - testutil::gksl(h, {c}, rho)).norm() < 1e-11);
}

TEST_CASE("resonance fluorescence coherence-vector form") {
  const double om = 0.18, g = 1.0;
  BlochModel bm = vectorize(catalog::resonance_fluorescence(om, g));
  RMatrix l0(3, 3);
  l0 << -g / 2, 0, 0, 0, -g / 2, -om, 0, om, -g;
  CHECK((bm.l0 - l0).norm() < 1e-14);
  CHECK((bm.b - Eigen::Vector3d(0, 0, -g)).norm() < 1e-14);
  // independent: x_ss = -L0^{-1} b
  RVector xss = -l0.inverse() * Eigen::Vector3d(0, 0, -g);
  CHECK((bm.x_ss - xss).norm() < 1e-14);
  // and rho_ss is annihilated by the direct GKSL map
  MasterEquation me = catalog::resonance_fluorescence(om, g);
  CHECK(testutil::gksl(me.hamiltonian(), me.lindblads(), bm.rho_ss()).norm() < 1e-14);
}

TEST_CASE("absorption/emission coherence-vector form") {
  const double gp = 0.05, gm = 1.0, gs = gp + gm, gd = gp - gm;
  BlochModel bm = vectorize(catalog::absorption_emission(gp, gm));
  CHECK((bm.l0 - RMatrix(Eigen::Vector3d(-gs / 2, -gs / 2, -gs).asDiagonal())).norm() < 1e-14);
  CHECK((bm.b - Eigen::Vector3d(0, 0, gd)).norm() < 1e-14);
  CHECK((bm.x_ss - Eigen::Vector3d(0, 0, gd / gs)).norm() < 1e-14);
}

TEST_CASE("L-invariance-under-unravelling suite: 1000 random settings") {
  suites::Result r = suites::unravelling_invariance(1000);
  CHECK(r.cases == 1000);
  CHECK(r.failures == 0);
  MESSAGE("worst deviation " << r.worst);
}

TEST_CASE("identity unravelling reproduces the original operators") {
  MasterEquation me = catalog::absorption_emission(0.3, 1.0);
  Unravelled un = apply_unravelling(me, UnravellingSetting::identity(2));
  CHECK((un.jumps[0] - me.lindblad(0)).norm() < 1e-15);
  CHECK((un.hamiltonian - me.hamiltonian()).norm() < 1e-15);
}

TEST_CASE("invalid inputs are rejected with their error kinds") {
  CMatrix h(2, 2);
  h << 0, 1, 0, 0;
  CMatrix c = CMatrix::Zero(2, 2);
  c(1, 0) = 1.0;
  CHECK(kind_of([&] { MasterEquation(h, {c}); }) == ErrorKind::AssumptionViolation);
  CHECK(kind_of([&] { MasterEquation(CMatrix::Zero(2, 3), {c}); }) == ErrorKind::InvalidDimension);
  CHECK(kind_of([&] { MasterEquation(CMatrix::Zero(2, 2), {CMatrix::Zero(3, 3)}); }) == ErrorKind::Shape);
  // pure dephasing keeps every diagonal state stationary
  CMatrix z = CMatrix::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  CHECK(kind_of([&] { vectorize(MasterEquation(CMatrix::Zero(2, 2), {z})); }) == ErrorKind::NoUniqueSteadyState);
  // pure decay has a rank-deficient steady state
  CHECK(kind_of([&] { vectorize(MasterEquation(CMatrix::Zero(2, 2), {c})); }) == ErrorKind::AssumptionViolation);
  UnravellingSetting u;
  u.s = CMatrix::Identity(1, 1) * 2.0;
  u.beta = CVector::Zero(1);
  CHECK(kind_of([&] { u.validate(1); }) == ErrorKind::InvalidSetting);
}

}
