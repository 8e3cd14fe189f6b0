// OpenMP kernels against their serial references. Set OMP_NUM_THREADS to vary the team.
#include "nglab/experiments.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace nglab;

template <bool Parallel>
void BM_Drift(benchmark::State& state) {
  const Scenario sc = build_scenario({{"loss", "ring-sine"}, {"scheme", "anti-pgd"}});
  const Vec w = ring::point(1.0);
  for (auto _ : state) {
    const DriftEstimate d = Parallel ? drift_expectation(sc.scheme, sc.noise, w, 1e-3, state.range(0), 7)
                                     : drift_expectation_serial(sc.scheme, sc.noise, w, 1e-3, state.range(0), 7);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Drift<true>)->Name("drift/openmp")->Arg(1 << 14)->Arg(1 << 17);
BENCHMARK(BM_Drift<false>)->Name("drift/serial")->Arg(1 << 14)->Arg(1 << 17);

template <bool Parallel>
void BM_SeedSweep(benchmark::State& state) {
  Scenario sc = build_scenario({{"loss", "ring-sine"},
                                {"scheme", "anti-pgd"},
                                {"plan", {{"alpha", 0.3}, {"sigma", 0.03}, {"steps", 5000}}},
                                {"n_seeds", static_cast<int>(state.range(0))}});
  for (auto _ : state) {
    const SimulateResult r = cmd_simulate(sc, false, Parallel);
    benchmark::DoNotOptimize(r.seeds.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SeedSweep<true>)->Name("seed_sweep/openmp")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SeedSweep<false>)->Name("seed_sweep/serial")->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
