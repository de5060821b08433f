#pragma once

#include <vector>

#include "preforge/algebra.hpp"

namespace preforge {

// K pure states as coherence vectors, rates kappa(j, k) for j <- k, and the
// stationary occupations of the rate matrix.
struct Ensemble {
  std::vector<RVector> states;
  RMatrix kappa;
  RVector occupations;

  int size() const { return static_cast<int>(states.size()); }
  RVector average() const;
};

// Clamps |kappa| < clamp to zero, zeroes the diagonal and computes occupations.
Ensemble make_ensemble(std::vector<RVector> states, RMatrix kappa, double clamp = 1e-9);

RVector stationary_distribution(const RMatrix& kappa);
bool strongly_connected(const RMatrix& kappa, double threshold = 1e-9);

// Member i of the result is member perm[i] of the input.
Ensemble permute(const Ensemble& e, const std::vector<int>& perm);

std::vector<CVector> state_vectors(const Ensemble& e, const OperatorBasis& basis);

}  // namespace preforge
