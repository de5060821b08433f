#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "helpers.hpp"
#include "preforge/catalog.hpp"
#include "preforge/constraints.hpp"
#include "preforge/error.hpp"
#include "preforge/solver.hpp"
#include "preforge/symmetry.hpp"

using namespace preforge;

namespace {

RMatrix axes(int n, std::initializer_list<int> idx) {
  RMatrix s = RMatrix::Zero(n, static_cast<Eigen::Index>(idx.size()));
  int c = 0;
  for (int i : idx) s(i, c++) = 1.0;
  return s;
}

bool same_span(const RMatrix& a, const RMatrix& b) {
  return a.cols() == b.cols() && (a * a.transpose() - b * b.transpose()).norm() < 1e-8;
}

// Imaginary H and real symmetric jumps: unital, conjugation-symmetric qutrit.
MasterEquation real_unital_qutrit() {
  RMatrix h(3, 3), c1(3, 3), c2(3, 3);
  h << 0.0, 0.1, -0.2, -0.1, 0.0, 0.4, 0.2, -0.4, 0.0;
  c1 << 1.0, 0.2, 0.0, 0.2, -0.3, 0.5, 0.0, 0.5, -0.7;
  c2 << 0.1, 0.7, -0.4, 0.7, 0.6, 0.1, -0.4, 0.1, -0.7;
  return MasterEquation(cplx(0.0, 1.0) * h.cast<cplx>(), {c1.cast<cplx>(), c2.cast<cplx>()});
}

}  // namespace

TEST_SUITE("symmetry") {

TEST_CASE("resonance fluorescence at Omega = 0.5: u-axis and u=0 disc only") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.5, 1.0));
  auto subs = find_invariant_subspaces(bm, 1, 2);
  REQUIRE(subs.size() == 2);
  CHECK(same_span(subs[0].basis_i0, axes(3, {0})));
  CHECK(same_span(subs[1].basis_i0, axes(3, {1, 2})));
  for (const auto& s : subs) {
    CHECK(s.certificate <= 1e-8);
    CHECK((s.witness - bm.x_ss).norm() >= 0.0);
    CHECK(s.witness.squaredNorm() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK((s.projector() * (s.witness - bm.x_ss) - (s.witness - bm.x_ss)).norm() < 1e-8);
    BlockForm f = block_form(bm, s);
    CHECK(f.l_i0.rows() == s.n());
  }
}

TEST_CASE("resonance fluorescence at Omega = 0.18: three eigen-axes and their planes") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  auto subs = find_invariant_subspaces(bm, 1, 2);
  int ones = 0, twos = 0;
  for (const auto& s : subs) (s.n() == 1 ? ones : twos)++;
  CHECK(ones == 3);
  CHECK(twos == 3);
}

TEST_CASE("defective resonance fluorescence keeps the rebit disc") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.25, 1.0));
  auto subs = find_invariant_subspaces(bm, 1, 2);
  bool disc = false;
  for (const auto& s : subs) disc = disc || same_span(s.basis_i0, axes(3, {1, 2}));
  CHECK(disc);
  InvariantSubspace d = make_subspace(bm, axes(3, {1, 2}), "rebit");
  CHECK(d.certificate <= 1e-12);
}

TEST_CASE("absorption/emission: azimuthal families plus the w-axis and w=0 disc") {
  BlochModel bm = vectorize(catalog::absorption_emission(0.05, 1.0));
  auto subs = find_invariant_subspaces(bm, 1, 2);
  bool w_axis = false, w_disc = false, family_axis = false, family_plane = false;
  for (const auto& s : subs) {
    if (same_span(s.basis_i0, axes(3, {2}))) w_axis = !s.family;
    if (same_span(s.basis_i0, axes(3, {0, 1}))) w_disc = !s.family;
    if (s.family && s.n() == 1) family_axis = std::abs(s.basis_i0(2, 0)) < 1e-12;
    if (s.family && s.n() == 2) family_plane = s.projector()(2, 2) > 1.0 - 1e-12;
  }
  CHECK(w_axis);
  CHECK(w_disc);
  CHECK(family_axis);
  CHECK(family_plane);
  // every member of a family is invariant
  for (const auto& s : subs) {
    if (!s.family) continue;
    RMatrix rot = (0.7 * s.family_generator).exp();
    CHECK_NOTHROW(make_subspace(bm, rot * s.basis_i0));
  }
}

TEST_CASE("make_subspace rejects non-invariant and pure-state-free spans") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  CHECK_THROWS_AS(make_subspace(bm, axes(3, {1})), Error);
  try {
    make_subspace(bm, axes(3, {1}));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InconsistentSubspace);
  }
  BlochModel q = vectorize(real_unital_qutrit());
  CHECK(q.x_ss.norm() < 1e-12);
  // imaginary (antisymmetric) coordinates: invariant but without pure states
  try {
    make_subspace(q, axes(8, {3, 4, 5}));
    FAIL("expected infeasible subspace");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleSubspace);
  }
  // real density matrices do contain pure states
  CHECK_NOTHROW(make_subspace(q, axes(8, {0, 1, 2, 6, 7})));
}

TEST_CASE("Wigner symmetry of resonance fluorescence is diag(-1,1,1), antiunitary") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  auto syms = find_wigner_symmetries(bm);
  REQUIRE(syms.size() == 1);
  CHECK((syms[0].t0 - RMatrix(Eigen::Vector3d(-1, 1, 1).asDiagonal())).norm() < 1e-12);
  CHECK(syms[0].kind == SymmetryKind::Antiunitary);
  CHECK_FALSE(syms[0].generator.has_value());
  WignerCertificate c = certify_wigner(bm, syms[0].t0);
  CHECK(c.ok);
  CHECK(c.commutator < 1e-12);
  CHECK_FALSE(certify_wigner(bm, RMatrix(Eigen::Vector3d(1, -1, 1).asDiagonal())).ok);
}

TEST_CASE("absorption/emission has the azimuthal generator") {
  BlochModel bm = vectorize(catalog::absorption_emission(0.05, 1.0));
  auto syms = find_wigner_symmetries(bm);
  const WignerSymmetry* gen = nullptr;
  for (const auto& w : syms)
    if (w.generator) gen = &w;
  REQUIRE(gen != nullptr);
  CHECK(gen->kind == SymmetryKind::Unitary);
  const RMatrix& a = *gen->generator;
  CHECK((a * bm.l0 - bm.l0 * a).norm() < 1e-12);
  CHECK((a * bm.b).norm() < 1e-12);
  CHECK(std::abs(a(2, 0)) + std::abs(a(2, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2)) < 1e-12);
  for (double th : {0.3, 1.1, 2.9}) CHECK(certify_wigner(bm, gen->at_angle(th).t0).ok);
  // composition and inverse stay in the group
  WignerSymmetry x = gen->at_angle(0.4);
  CHECK((x.compose(x.inverse()).t0 - RMatrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("classification from the Lie bracket") {
  OperatorBasis b2 = build_basis(2);
  Eigen::Matrix3d rot = Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  CHECK(classify(b2, rot) == SymmetryKind::Unitary);
  CHECK(classify(b2, -RMatrix(rot)) == SymmetryKind::Antiunitary);

  // qutrit: conjugation by a unitary, transposition, and a generic rotation
  std::mt19937_64 rng(1);
  OperatorBasis b3 = build_basis(3);
  CMatrix u = testutil::random_isometry(3, 3, rng);
  RMatrix tu(8, 8), tt(8, 8);
  for (int j = 0; j < 8; ++j) {
    // coordinates() of a basis element is 3 e_j
    tu.col(j) = b3.coordinates(u * b3.element(j) * u.adjoint()) / 3.0;
    tt.col(j) = b3.coordinates(b3.element(j).transpose()) / 3.0;
  }
  CHECK(classify(b3, tu) == SymmetryKind::Unitary);
  CHECK(classify(b3, tt) == SymmetryKind::Antiunitary);
  Eigen::HouseholderQR<RMatrix> qr(RMatrix::Random(8, 8));
  RMatrix o = qr.householderQ();
  CHECK(classify(b3, o) == SymmetryKind::Unknown);
}

TEST_CASE("operator form of a Wigner map reproduces the coherence-space action") {
  std::mt19937_64 rng(2);
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  WignerSymmetry w = find_wigner_symmetries(bm)[0];
  WignerOperator op = wigner_operator(bm.basis, w);
  CHECK(op.antiunitary);
  for (int t = 0; t < 10; ++t) {
    CVector psi = random_state(2, rng);
    RVector x = state_to_bloch(psi, bm.basis);
    CHECK((state_to_bloch(op.apply(psi), bm.basis) - w.t0 * x).norm() < 1e-12);
  }
}

TEST_CASE("apply_wigner maps PREs to PREs and rejects non-symmetries") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  WignerSymmetry w = find_wigner_symmetries(bm)[0];
  for (const auto& e : analytic_k2(bm).ensembles) {
    Ensemble img = apply_wigner(w, e, bm.basis);
    CHECK(verify(bm, img, 1e-9).pass);
  }
  // a qubit reflection keeps states valid but is no symmetry of this model
  WignerSymmetry flip = w;
  flip.t0 = RMatrix(Eigen::Vector3d(1, -1, 1).asDiagonal());
  CHECK_FALSE(verify(bm, apply_wigner(flip, analytic_k2(bm).ensembles[1], bm.basis), 1e-9).pass);

  // a generic qutrit rotation sends pure states outside state space
  std::mt19937_64 rng(8);
  OperatorBasis b3 = build_basis(3);
  std::vector<RVector> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(state_to_bloch(random_state(3, rng), b3));
  Ensemble e3 = make_ensemble(xs, RMatrix::Ones(3, 3));
  Eigen::HouseholderQR<RMatrix> qr(RMatrix::Random(8, 8));
  WignerSymmetry bad;
  bad.t0 = qr.householderQ();
  try {
    apply_wigner(bad, e3, b3);
    FAIL("expected symmetry violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SymmetryViolation);
  }
}

TEST_CASE("joint symmetry: diag(-1,1,1) with both resonance fluorescence subspaces") {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.5, 1.0));
  WignerSymmetry w = find_wigner_symmetries(bm)[0];
  for (const auto& s : find_invariant_subspaces(bm, 1, 2)) {
    JointReport r = check_joint(s, w, bm);
    CHECK(r.joint());
    if (s.n() == 1) CHECK(r.t_i0(0, 0) == doctest::Approx(-1.0));
    if (s.n() == 2) CHECK((r.t_i0 - RMatrix::Identity(2, 2)).norm() < 1e-12);
  }
}

}
