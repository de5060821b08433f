#include <doctest.h>

#include "preforge/catalog.hpp"
#include "preforge/error.hpp"
#include "preforge/trajectory.hpp"

using namespace preforge;

namespace {

struct Setup {
  MasterEquation me = catalog::resonance_fluorescence(0.18, 1.0);
  BlochModel bm = vectorize(me);
  Ensemble e1;
  AdaptiveScheme scheme;
  Setup() {
    for (const auto& e : analytic_k2(bm).ensembles)
      if (std::abs(e.states[0](0)) > 1e-3) e1 = e;
    scheme = synthesize(me, e1, 1);
  }
};

}  // namespace

TEST_SUITE("trajectory") {

TEST_CASE("jump statistics follow the ensemble rates") {
  Setup s;
  TrajectoryConfig c;
  c.n_jumps = 20000;
  c.dt = 0.01;
  c.rng_seed = 4;
  TrajectoryStats st = simulate(s.me, s.scheme, s.e1, c);
  CHECK(st.n_jumps == 20000);
  CHECK(st.max_state_drift <= 1e-6);
  // renewal process with exponential sojourns: sd of the occupancy fraction
  const double p = s.e1.occupations(0);
  const double sigma = std::sqrt(p * (1 - p) / (0.5 * st.n_jumps));
  CHECK(std::abs(st.occupancy(0) - p) <= 3 * sigma);
  // empirical rates
  for (int k = 0; k < 2; ++k) {
    const double rate = st.jump_counts(1 - k, k) / (st.occupancy(k) * st.time);
    CHECK(rate == doctest::Approx(s.e1.kappa(1 - k, k)).epsilon(0.05));
  }
  CHECK(st.self_loops.sum() == 0.0);
}

TEST_CASE("same seed, same trajectory") {
  Setup s;
  TrajectoryConfig c;
  c.n_jumps = 500;
  c.dt = 0.01;
  c.log_events = true;
  TrajectoryStats a = simulate(s.me, s.scheme, s.e1, c), b = simulate(s.me, s.scheme, s.e1, c);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].t == b.events[i].t);
    CHECK(a.events[i].to == s.scheme.jump_map[a.events[i].from][a.events[i].channel]);
  }
  c.rng_seed = 2;
  TrajectoryStats other = simulate(s.me, s.scheme, s.e1, c);
  CHECK(other.events.front().t != a.events.front().t);
}

TEST_CASE("a scheme for a different ensemble fails to realize it") {
  Setup s;
  Ensemble wrong;
  for (const auto& e : analytic_k2(s.bm).ensembles)
    if (std::abs(e.states[0](0)) < 1e-3) wrong = e;
  TrajectoryConfig c;
  c.n_jumps = 200;
  c.dt = 0.01;
  c.record = RecordPolicy::Strided;
  c.stride = 50;
  try {
    simulate(s.me, s.scheme, wrong, c);
    FAIL("expected realization failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RealizationFailure);
  }
}

TEST_CASE("time step guard and config errors") {
  Setup s;
  TrajectoryConfig c;
  c.n_jumps = 10;
  c.dt = 1.0;
  CHECK_THROWS_AS(simulate(s.me, s.scheme, s.e1, c), Error);
  TrajectoryConfig none;
  CHECK_THROWS_AS(simulate(s.me, s.scheme, s.e1, none), Error);
}

TEST_CASE("unconditional average: serial equals parallel, and tracks exp(Lt)") {
  Setup s;
  UnconditionalConfig c;
  c.n_trajectories = 600;
  c.times = {0.0, 0.5, 1.0};
  c.execution = Execution::Serial;
  UnconditionalReport a = unconditional_check(s.me, s.scheme, c);
  c.execution = Execution::Parallel;
  UnconditionalReport b = unconditional_check(s.me, s.scheme, c);
  REQUIRE(a.distances.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.distances[i] == b.distances[i]);
  CHECK(a.distances[0] < 1e-12);
  // statistical floor for 600 samples
  CHECK(a.max_distance < 0.08);
}

}
