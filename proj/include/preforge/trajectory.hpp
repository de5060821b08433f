#pragma once

#include <cstdint>
#include <vector>

#include "preforge/measurement.hpp"

namespace preforge {

enum class RecordPolicy { JumpsOnly, Strided };

struct TrajectoryConfig {
  double dt = 0.0;           // 0 selects 1e-3 / ||L0||
  double t_max = 0.0;        // 0 means unlimited (n_jumps must be set)
  long long n_jumps = 0;     // counted after burn-in
  std::uint64_t rng_seed = 1;
  RecordPolicy record = RecordPolicy::JumpsOnly;
  int stride = 1000;         // steps between strided drift checks
  int burn_in = 20;
  double drift_limit = 1e-4;
  bool log_events = false;
};

struct JumpEvent {
  double t = 0.0;
  int channel = 0;
  int from = 0;
  int to = 0;
};

struct TrajectoryStats {
  RVector occupancy;       // fraction of post burn-in time per member
  RMatrix jump_counts;     // (j, k): jumps j <- k, off-diagonal
  RVector self_loops;      // per member
  double max_state_drift = 0.0;
  long long n_jumps = 0;   // post burn-in inter-member jumps
  double time = 0.0;       // post burn-in time
  double dt = 0.0;
  std::vector<JumpEvent> events;
};

TrajectoryStats simulate(const MasterEquation& me, const AdaptiveScheme& scheme, const Ensemble& ens,
                         const TrajectoryConfig& cfg);

struct UnconditionalConfig {
  std::vector<double> times{0.0, 0.5, 1.0, 2.0};
  int n_trajectories = 200;
  double dt = 1e-3;
  std::uint64_t rng_seed = 1;
  double tolerance = 5e-3;
  CVector psi0;  // empty selects basis state |0>
  Execution execution = Execution::Parallel;
};

struct UnconditionalReport {
  std::vector<double> times;
  std::vector<double> distances;  // trace distance to exp(L t) rho0
  double max_distance = 0.0;
  int n_trajectories = 0;
  double tolerance = 0.0;
  bool pass = false;
};

UnconditionalReport unconditional_check(const MasterEquation& me, const AdaptiveScheme& scheme,
                                        const UnconditionalConfig& cfg);

}  // namespace preforge
