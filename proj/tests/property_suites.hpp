#pragma once

#include <cstdint>

namespace suites {

struct Result {
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  // largest deviation seen
};

// rho -> x -> rho and psi -> x -> psi on random D = 2..4 inputs.
Result round_trip(int cases, std::uint64_t seed = 2024);
// Tr rho^2 = (1 + 2|x|^2/D)/D, and |x|^2 = D(D-1)/2 for pure states.
Result purity_bridge(int cases, std::uint64_t seed = 77);
// Random (S, beta) leaves the generator unchanged.
Result unravelling_invariance(int cases, std::uint64_t seed = 99);
// Bloch residual vs projector residual vs the GKSL map applied directly.
Result residual_equivalence(int cases, std::uint64_t seed = 31);
// dedup(dedup(list)) == dedup(list) on jittered, permuted copies.
Result dedup_idempotence(int cases, std::uint64_t seed = 12);

}  // namespace suites
