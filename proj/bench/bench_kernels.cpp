// Serial reference vs OpenMP for the three parallel kernels. Thread count
// follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "preforge/catalog.hpp"
#include "preforge/measurement.hpp"
#include "preforge/solver.hpp"
#include "preforge/trajectory.hpp"

using namespace preforge;

namespace {

Execution mode(const benchmark::State& s) { return s.range(0) ? Execution::Parallel : Execution::Serial; }

const char* label(const benchmark::State& s) { return s.range(0) ? "openmp" : "serial"; }

void multistart(benchmark::State& state) {
  BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
  ConstraintSystem cs = build_full(bm, 3, TransitionGraph::cyclic(3));
  SolverConfig cfg;
  cfg.seeds = 256;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(solve_numeric(cs, cfg));
  state.SetLabel(label(state));
}

void trajectory_batch(benchmark::State& state) {
  MasterEquation me = catalog::resonance_fluorescence(0.18, 1.0);
  BlochModel bm = vectorize(me);
  Ensemble e1;
  for (const auto& e : analytic_k2(bm).ensembles)
    if (std::abs(e.states[0](0)) > 1e-3) e1 = e;
  AdaptiveScheme scheme = synthesize(me, e1, 1);
  UnconditionalConfig cfg;
  cfg.n_trajectories = 4096;
  cfg.times = {0.0, 1.0};
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(unconditional_check(me, scheme, cfg));
  state.SetLabel(label(state));
}

void member_synthesis(benchmark::State& state) {
  MasterEquation me = catalog::absorption_emission(0.05, 1.0);
  BlochModel bm = vectorize(me);
  Ensemble fam = solve_wigner_family(bm, 4).ensembles.front();
  SynthesisOptions opt;
  opt.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(me, fam, 2, opt));
  state.SetLabel(label(state));
}

}  // namespace

BENCHMARK(multistart)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(trajectory_batch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(member_synthesis)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
