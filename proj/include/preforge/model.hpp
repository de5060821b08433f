#pragma once

#include <string>
#include <vector>

#include "preforge/algebra.hpp"

namespace preforge {

class MasterEquation {
 public:
  MasterEquation() = default;
  // Validates Hermiticity and independence. Lindblad operators with a trace
  // are shifted to traceless form with a compensating Hamiltonian term; each
  // such correction appends a message to warnings().
  MasterEquation(CMatrix hamiltonian, std::vector<CMatrix> lindblads);

  int dim() const { return static_cast<int>(hamiltonian_.rows()); }
  int num_lindblads() const { return static_cast<int>(lindblads_.size()); }
  const CMatrix& hamiltonian() const { return hamiltonian_; }
  const std::vector<CMatrix>& lindblads() const { return lindblads_; }
  const CMatrix& lindblad(int l) const { return lindblads_.at(l); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // H - (i/2) sum c^dag c
  CMatrix effective_hamiltonian() const;

 private:
  CMatrix hamiltonian_;
  std::vector<CMatrix> lindblads_;
  std::vector<std::string> warnings_;
};

struct BlochModel {
  OperatorBasis basis;
  RMatrix l0;
  RVector b;
  RVector x_ss;
  Superoperator generator;

  int dim() const { return basis.dim(); }
  int coherence_dim() const { return static_cast<int>(l0.rows()); }
  CMatrix rho_ss() const { return bloch_to_rho(x_ss, basis); }
};

struct UnravellingSetting {
  CMatrix s;     // M x L, S^dag S = 1
  CVector beta;  // M

  static UnravellingSetting identity(int l);
  int detectors() const { return static_cast<int>(s.rows()); }
  // Throws invalid-setting when not semi-unitary or M < L.
  void validate(int num_lindblads, double tol = 1e-10) const;
};

struct Unravelled {
  std::vector<CMatrix> jumps;  // c'_m
  CMatrix hamiltonian;         // H'
  CMatrix effective;           // H'_eff
};

Superoperator lindbladian(const CMatrix& hamiltonian, const std::vector<CMatrix>& jumps);
Superoperator lindbladian(const MasterEquation& me);

BlochModel vectorize(const MasterEquation& me, const OperatorBasis& basis);
BlochModel vectorize(const MasterEquation& me);

Unravelled apply_unravelling(const MasterEquation& me, const UnravellingSetting& u);
CMatrix no_jump_generator(const MasterEquation& me, const UnravellingSetting& u);

}  // namespace preforge
