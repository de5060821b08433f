#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "preforge/constraints.hpp"

namespace preforge {

enum class Execution { Serial, Parallel };

struct SolverConfig {
  double tol = 1e-10;
  int seeds = 512;
  int max_iter = 200;
  std::uint64_t rng_seed = 1;
  double dedup_eps = 1e-6;
  int pin_grid = 100;
  Execution execution = Execution::Parallel;
  // Extra coherence-space maps under which ensembles count as equal.
  std::vector<RMatrix> family;
};

struct StartRecord {
  int start = 0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::string status;  // accepted | duplicate | not-converged | negative-rate | ...
};

struct SolutionSet {
  std::vector<Ensemble> ensembles;
  std::vector<StartRecord> diagnostics;
  std::vector<std::string> family_tags;  // one per ensemble, may be empty
  std::vector<std::string> notes;
};

SolutionSet analytic_k2(const BlochModel& bm);

// Members on the circle swept by the azimuthal symmetry, rates from the two
// linear equations; returns polytope vertices and one interior point.
SolutionSet solve_wigner_family(const BlochModel& bm, int k);

SolutionSet solve_numeric(const ConstraintSystem& cs, const SolverConfig& cfg);

// Max member distance (after the best permutation and family element) plus
// the rate distance divided by kappa_scale.
double ensemble_distance(const Ensemble& a, const Ensemble& b, double kappa_scale,
                         const std::vector<RMatrix>& family = {});

// Order-preserving removal of ensembles within eps of an earlier one.
std::vector<Ensemble> dedup(const std::vector<Ensemble>& in, double eps, double kappa_scale,
                            const std::vector<RMatrix>& family = {});

// Canonical member order and a canonical ordering of the set.
Ensemble canonical(const Ensemble& e);
void canonical_sort(std::vector<Ensemble>& set);

// Continuous-symmetry elements (sampled every degree) that map the span to
// itself, excluding the identity.
std::vector<RMatrix> rotation_images(const BlochModel& bm, const RMatrix& span);

struct ScanSystem {
  ConstraintSystem cs;
  std::vector<RMatrix> family;
};

struct ScanRow {
  double value = 0.0;
  int count = 0;
  std::string note;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::vector<double> thresholds;  // midpoints where the count changes
};

ScanResult scan_existence(const std::function<ScanSystem(double)>& factory,
                          const std::vector<double>& grid, const SolverConfig& cfg);

}  // namespace preforge
