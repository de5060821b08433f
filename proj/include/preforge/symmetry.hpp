#pragma once

#include <optional>
#include <string>
#include <vector>

#include "preforge/ensemble.hpp"
#include "preforge/model.hpp"

namespace preforge {

struct InvariantSubspace {
  RMatrix basis_i0;  // (D^2-1) x N, orthonormal
  RMatrix basis_r0;  // orthonormal complement
  double certificate = 0.0;  // ||R^T L0 Q||
  RVector witness;           // pure state in x_ss + span(basis_i0)
  std::string label;
  // Set when this span is one representative of a continuous family
  // (degenerate eigenvalue); the generator rotates the representative.
  bool family = false;
  RMatrix family_generator;
  std::string family_note;

  int n() const { return static_cast<int>(basis_i0.cols()); }
  RMatrix projector() const { return basis_i0 * basis_i0.transpose(); }
};

struct SubspaceSearchOptions {
  int max_candidates = 4096;
  int witness_starts = 16;
  std::uint64_t rng_seed = 7;
};

// Wraps a user-supplied span; checks the block certificate and looks for a
// pure-state witness (throws inconsistent-subspace / infeasible-subspace).
InvariantSubspace make_subspace(const BlochModel& bm, const RMatrix& span, std::string label = "");

std::vector<InvariantSubspace> find_invariant_subspaces(const BlochModel& bm, int n_min, int n_max,
                                                        const SubspaceSearchOptions& opt = {});

struct BlockForm {
  RMatrix l_i0;
  RMatrix l_i0r0;
  RMatrix l_r0;
  bool dual_invariant = false;
};

BlockForm block_form(const BlochModel& bm, const InvariantSubspace& sub);

enum class SymmetryKind { Unitary, Antiunitary, Unknown };
const char* to_string(SymmetryKind k);

struct WignerSymmetry {
  RMatrix t0;
  SymmetryKind kind = SymmetryKind::Unknown;
  // Present for elements of a continuous family, t0 = exp(angle * generator).
  std::optional<RMatrix> generator;
  double angle = 0.0;
  std::string tag;

  static WignerSymmetry identity(int n);
  WignerSymmetry at_angle(double theta) const;
  WignerSymmetry compose(const WignerSymmetry& other) const;  // this after other
  WignerSymmetry inverse() const;
};

struct WignerCertificate {
  double orthogonality = 0.0;
  double commutator = 0.0;    // ||T^T L0 T - L0|| / ||L0||
  double b_defect = 0.0;      // ||T b - b|| / ||b||
  double xss_defect = 0.0;    // ||T x_ss - x_ss||
  double min_state_eig = 0.0; // over sampled pure-state images
  bool ok = false;
};

WignerCertificate certify_wigner(const BlochModel& bm, const RMatrix& t0, int samples = 200);

// Unitary if T preserves the Lie bracket, antiunitary if it negates it.
SymmetryKind classify(const OperatorBasis& basis, const RMatrix& t0, double tol = 1e-8);

std::vector<WignerSymmetry> find_wigner_symmetries(const BlochModel& bm);

struct JointReport {
  bool off_diagonal_zero = false;    // T_IR = T_RI = 0
  bool restricted_commutes = false;  // T_I^-1 L_I T_I = L_I
  bool fixes_steady_state = false;   // T x_ss = x_ss
  bool full_wigner = false;          // certified on the whole state space
  double off_diagonal = 0.0;
  double restricted_commutator = 0.0;
  double xss_defect = 0.0;
  RMatrix t_i0;

  bool joint() const { return off_diagonal_zero && restricted_commutes && fixes_steady_state && full_wigner; }
  bool subspace_compatible() const {
    return off_diagonal_zero && restricted_commutes && fixes_steady_state;
  }
};

JointReport check_joint(const InvariantSubspace& sub, const WignerSymmetry& w, const BlochModel& bm);

Ensemble apply_wigner(const WignerSymmetry& w, const Ensemble& ens, const OperatorBasis& basis,
                      double tol = 1e-8);

// Operator-level form of a Wigner map: rho -> U rho U^dag (unitary) or
// U conj(rho) U^dag (antiunitary).
struct WignerOperator {
  CMatrix u;
  bool antiunitary = false;
  CMatrix apply(const CMatrix& op) const;  // map on a jump-type operator
  CVector apply(const CVector& psi) const;
};

WignerOperator wigner_operator(const OperatorBasis& basis, const WignerSymmetry& w);

}  // namespace preforge
