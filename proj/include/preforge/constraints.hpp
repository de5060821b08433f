#pragma once

#include <string>
#include <utility>
#include <vector>

#include "preforge/ensemble.hpp"
#include "preforge/model.hpp"
#include "preforge/symmetry.hpp"

namespace preforge {

// Allowed kappa support; an edge (j, k) is the transition j <- k.
struct TransitionGraph {
  int k = 0;
  std::vector<std::pair<int, int>> edges;
  std::string name;

  static TransitionGraph cyclic(int k);  // k -> (k+1) mod K
  static TransitionGraph full(int k);
  bool contains(int j, int k) const;
};

enum class StructureKind { Full, Subspace, Wigner, Joint };
const char* to_string(StructureKind s);

// Polynomial system for a K-member ensemble. Every member is an affine image
// x_k = offset_k + B_k z_r of the parameters of its class representative r;
// rates are shared per edge orbit. Residual rows are the projected Bloch
// conditions B_r^T (L0 x_r + b - sum_j kappa_jr (x_j - x_r)) and the purity
// conditions |x_r|^2 - D(D-1)/2, for representatives only.
class ConstraintSystem {
 public:
  struct Member {
    int rep = 0;         // representative member index
    int power = 0;       // x_k = T^power x_rep
    RVector offset;
    RMatrix basis;
    int param_offset = 0;
  };

  int k() const { return static_cast<int>(members_.size()); }
  int n_params() const { return n_params_; }
  int n_constraints() const { return n_constraints_; }
  StructureKind structure() const { return structure_; }
  const TransitionGraph& graph() const { return graph_; }
  const std::vector<Member>& members() const { return members_; }
  const std::vector<int>& representatives() const { return reps_; }
  // Edges kept after symmetry reduction with their parameter index.
  const std::vector<std::pair<std::pair<int, int>, int>>& rate_edges() const { return rate_edges_; }
  int first_rate_param() const { return first_rate_param_; }
  const BlochModel& model() const { return bm_; }
  // False when the symmetry forces rates that break strong connectivity.
  bool consistent() const { return consistent_; }
  const std::string& note() const { return note_; }

  RVector residual(const RVector& p) const;
  void residual_and_jacobian(const RVector& p, RVector& r, RMatrix* jac) const;
  Ensemble unpack(const RVector& p) const;
  // Least-squares parameters of an ensemble lying in this structure.
  RVector pack(const Ensemble& e) const;

  static ConstraintSystem assemble(const BlochModel& bm, int k, const TransitionGraph& graph,
                                   StructureKind kind, const RMatrix* subspace,
                                   const RMatrix* t0, const std::vector<int>* perm);

 private:
  BlochModel bm_;
  TransitionGraph graph_;
  StructureKind structure_ = StructureKind::Full;
  std::vector<Member> members_;
  std::vector<int> reps_;
  std::vector<std::pair<std::pair<int, int>, int>> rate_edges_;
  std::vector<RMatrix> powers_;  // T^m
  int n_params_ = 0;
  int n_constraints_ = 0;
  int first_rate_param_ = 0;
  bool consistent_ = true;
  std::string note_;
};

ConstraintSystem build_full(const BlochModel& bm, int k, const TransitionGraph& graph);
ConstraintSystem build_subspace_reduced(const BlochModel& bm, const InvariantSubspace& sub, int k,
                                        const TransitionGraph& graph);
ConstraintSystem build_wigner_reduced(const BlochModel& bm, const WignerSymmetry& w,
                                      const std::vector<int>& perm, int k,
                                      const TransitionGraph& graph);
ConstraintSystem build_joint(const BlochModel& bm, const InvariantSubspace& sub,
                             const WignerSymmetry& w, const std::vector<int>& perm, int k,
                             const TransitionGraph& graph);

struct MemberReport {
  double residual = 0.0;        // Frobenius norm, projector form
  double bloch_residual = 0.0;  // Euclidean norm, coherence form
  double purity_defect = 0.0;   // |Tr rho^2 - 1|
  double min_eigenvalue = 0.0;
};

struct VerificationReport {
  std::vector<MemberReport> members;
  double max_residual = 0.0;
  double max_bloch_residual = 0.0;
  double max_purity_defect = 0.0;
  double min_eigenvalue = 0.0;
  double min_rate = 0.0;
  double average_defect = 0.0;  // |sum w_k x_k - x_ss|
  bool connected = false;
  RVector occupations;
  bool pass = false;
  double tol = 0.0;
};

// Projector-form check: || L(P_k) - sum_j kappa_jk (P_j - P_k) ||_F per member.
VerificationReport verify(const BlochModel& bm, const Ensemble& ens, double tol = 1e-8);

int heuristic_min_k(int d, bool real_subspace);

}  // namespace preforge
