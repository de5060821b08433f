#include <doctest.h>

#include <random>

#include "preforge/catalog.hpp"
#include "preforge/spectrum.hpp"

using namespace preforge;

namespace {

// Angle-free comparison of a complex eigenvector with a real direction.
double misalignment(const CVector& v, const RVector& dir) {
  CVector d = dir.cast<cplx>().normalized();
  return std::sqrt(std::max(0.0, 1.0 - std::norm(d.dot(v)) / v.squaredNorm()));
}

}  // namespace

TEST_SUITE("spectrum") {

TEST_CASE("eigenpairs of random matrices") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const int d = 3 + t % 6;
    RMatrix a = RMatrix::NullaryExpr(d, d, [&] { return n(rng); });
    Spectrum s = eig_full(a);
    int total = 0;
    for (const auto& c : s.clusters) {
      total += c.algebraic;
      for (const auto& v : c.eigenvectors)
        CHECK((a.cast<cplx>() * v - c.value * v).norm() < 1e-9 * s.norm);
    }
    CHECK(total == d);
    CHECK(static_cast<int>(s.eigenvalues.size()) == d);
    CHECK_FALSE(s.defective());
  }
}

TEST_CASE("similarity-transformed Jordan block") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  RMatrix j = RMatrix::Zero(4, 4);
  j(0, 0) = j(1, 1) = j(2, 2) = -1.0;
  j(0, 1) = j(1, 2) = 1.0;
  j(3, 3) = -2.0;
  RMatrix p = RMatrix::NullaryExpr(4, 4, [&] { return n(rng); });
  RMatrix a = p * j * p.inverse();
  Spectrum s = eig_full(a);
  REQUIRE(s.defective());
  const EigenCluster* c = nullptr;
  for (const auto& cl : s.clusters)
    if (std::abs(cl.value - cplx(-1.0)) < 1e-4) c = &cl;
  REQUIRE(c != nullptr);
  CHECK(c->algebraic == 3);
  CHECK(c->geometric == 1);
  REQUIRE(c->chains.size() == 1);
  REQUIRE(c->chains[0].size() == 3);
  const CMatrix ac = a.cast<cplx>();
  const auto& ch = c->chains[0];
  CHECK((ac * ch[0] - c->value * ch[0]).norm() < 1e-6 * ch[0].norm());
  for (int i = 1; i < 3; ++i) CHECK((ac * ch[i] - c->value * ch[i] - ch[i - 1]).norm() < 1e-6 * ch[i].norm());
}

TEST_CASE("resonance fluorescence at Omega = gamma/4 is defective") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.25, 1.0));
  Spectrum s = eig_full(bm.l0);
  REQUIRE(s.defective());
  REQUIRE(s.clusters.size() == 2);
  bool saw_simple = false, saw_jordan = false;
  for (const auto& c : s.clusters) {
    if (std::abs(c.value - cplx(-0.5)) < 1e-8) {
      saw_simple = true;
      CHECK(misalignment(c.eigenvectors[0], Eigen::Vector3d(1, 0, 0)) < 1e-8);
    }
    if (std::abs(c.value - cplx(-0.75)) < 1e-6) {
      saw_jordan = true;
      CHECK(c.algebraic == 2);
      CHECK(c.geometric == 1);
      CHECK(misalignment(c.eigenvectors[0], Eigen::Vector3d(0, 1, 1)) < 1e-8);
      REQUIRE(c.chains.size() == 1);
      REQUIRE(c.chains[0].size() == 2);
      const CVector& g = c.chains[0][1];
      CHECK(std::abs(g(0)) < 1e-8 * g.norm());  // rebit plane
      CHECK((bm.l0.cast<cplx>() * g - c.value * g - c.chains[0][0]).norm() < 1e-6);
    }
  }
  CHECK(saw_simple);
  CHECK(saw_jordan);
}

TEST_CASE("orth and null space") {
  RMatrix m(3, 3);
  m << 1, 2, 3, 2, 4, 6, 1, 0, 1;
  CHECK(orth(m).cols() == 2);
  RMatrix ns = null_space(m, 1e-10);
  REQUIRE(ns.cols() == 1);
  CHECK((m * ns).norm() < 1e-12);
  CHECK(norm2(RMatrix::Identity(4, 4) * 3.0) == doctest::Approx(3.0));
}

}
