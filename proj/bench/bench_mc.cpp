// Serial reference against the OpenMP Monte Carlo kernel on S2.

#include "oracles.hpp"

#include "slowfast/reduced.hpp"
#include "slowfast/sde.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace slowfast;

namespace {

struct Setup {
  ProblemData data = oracle::s2();
  double eps = 0.1;
  double step = 0.005;
  Vector x0 = Vector::Ones(2);
  GainSchedule gains =
      reduced_gain_schedule(solve_reduced_dre(data), simulation_grid(data, eps, step));
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_serial(benchmark::State& state) {
  const Setup& s = setup();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        reference::mc_cost_serial(s.data, s.eps, s.gains, s.x0, state.range(0), s.step, 7));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_parallel(benchmark::State& state) {
  const Setup& s = setup();
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc_cost(s.data, s.eps, s.gains, s.x0, state.range(0), s.step, 7));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_serial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_parallel)
    ->ArgsProduct({{2000}, {1, 2, 4}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
