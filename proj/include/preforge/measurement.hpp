#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "preforge/constraints.hpp"
#include "preforge/solver.hpp"

namespace preforge {

// One unravelling setting per ensemble member plus the routing table:
// jump_map[k][m] is the member reached when detector m clicks while in
// member k (k itself for a self-loop, -1 when that click cannot occur).
struct AdaptiveScheme {
  std::vector<UnravellingSetting> settings;
  std::vector<std::vector<int>> jump_map;
  int size() const { return static_cast<int>(settings.size()); }
};

struct SynthesisOptions {
  int starts = 48;
  std::uint64_t rng_seed = 3;
  double wlo_factor = 10.0;  // |beta_m|^2 <= wlo_factor * max_l Tr[c_l^dag c_l rho_ss]
  int max_routings = 64;
  Execution execution = Execution::Parallel;
};

struct SchemeReport {
  double eigen_residual = 0.0;   // max ||(1 - P_k) H'_eff phi_k||
  double direction_residual = 0.0;  // max ||(1 - P_j) c'_m phi_k||
  double rate_residual = 0.0;    // max |sum_{m->j} ||c'_m phi_k||^2 - kappa_jk|
  double invariance = 0.0;       // max superoperator distance to L
  double max_beta_sq = 0.0;
  double wlo_bound = 0.0;
  std::vector<double> self_loop_rates;  // per member
  bool pass = false;
};

AdaptiveScheme synthesize(const MasterEquation& me, const Ensemble& ens, int m,
                          const SynthesisOptions& opt = {});

SchemeReport check_scheme(const MasterEquation& me, const Ensemble& ens, const AdaptiveScheme& scheme);

struct OperationVerdict {
  int member = 0;
  int detector = -1;  // -1 marks the no-jump operation
  bool preserves = true;
  double max_distance = 0.0;
  RVector witness;  // sampled state whose image leaves the subspace
};

struct PreservationReport {
  std::vector<OperationVerdict> operations;
  bool preserves = true;
};

PreservationReport check_subspace_preservation(const MasterEquation& me, const AdaptiveScheme& scheme,
                                               const InvariantSubspace& sub, const BlochModel& bm,
                                               int samples = 60, std::uint64_t rng_seed = 5);

struct WignerSchemeReport {
  std::vector<double> jump_distances;  // per (member, detector), row-major
  double max_jump_distance = 0.0;
  double max_no_jump_distance = 0.0;
  bool pass = false;          // jump superoperators map onto each other
  bool no_jump_transfer = false;
};

WignerSchemeReport check_wigner_scheme(const MasterEquation& me, const AdaptiveScheme& scheme,
                                       const WignerSymmetry& w, const std::vector<int>& perm,
                                       const OperatorBasis& basis);

// Conjugates every operator of the scheme by the operator form of w; the
// result realizes apply_wigner(w, ens) with members relabelled by perm.
struct TransformedScheme {
  std::vector<std::vector<CMatrix>> jumps;  // [k][m]
  std::vector<CMatrix> effective;           // [k]
};
TransformedScheme transform_scheme(const MasterEquation& me, const AdaptiveScheme& scheme,
                                   const WignerOperator& op);

}  // namespace preforge
