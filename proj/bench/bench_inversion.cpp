// Serial reference sum against the tabulated OpenMP inverter, plus a grid.
#include <omp.h>

#include <benchmark/benchmark.h>

#include "fcop/copula.hpp"
#include "fcop/quadrature.hpp"
#include "support/models.hpp"

namespace {

using namespace fcop;

FourierInverter make_inverter() {
  const auto m = testing::nig_minus();
  return FourierInverter(m, default_damping(*m), KernelKind::cdf, QuadratureSpec{});
}

void BM_ReferenceSum(benchmark::State& state) {
  const FourierInverter inv = make_inverter();
  const auto axes = inv.axes(0);
  const double x[2] = {-0.05, 0.02};
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::integrate(inv.model(), inv.damping(), KernelKind::cdf, axes, x));
  }
  state.counters["nodes"] = static_cast<double>(inv.nodes_at_level(0));
}
BENCHMARK(BM_ReferenceSum)->Unit(benchmark::kMillisecond);

void BM_InverterLevel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const FourierInverter inv = make_inverter();
  inv.prepare(1);
  const double x[2] = {-0.05, 0.02};
  for (auto _ : state) benchmark::DoNotOptimize(inv.evaluate_level(x, 0));
  state.counters["nodes"] = static_cast<double>(inv.nodes_at_level(0));
}
BENCHMARK(BM_InverterLevel)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_CopulaGrid(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto m = testing::nig_plus();
  for (auto _ : state) benchmark::DoNotOptimize(copula_grid(m, GridSpec::equispaced(2, 20)));
}
BENCHMARK(BM_CopulaGrid)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
