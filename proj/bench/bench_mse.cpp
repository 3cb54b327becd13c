// Serial reference against the OpenMP quadrature, plus the sampling kernel.
// WICKLAB_THREADS or OMP_NUM_THREADS controls the parallel side.

#include <benchmark/benchmark.h>

#include "wicklab/error_engine.hpp"
#include "wicklab/verification.hpp"

using namespace wicklab;

namespace {

void run_mse(benchmark::State& state, const IntegrandSpec& u, QuadratureConfig::Execution ex) {
  const auto nodes = std::make_shared<const NodeSet>(NodeSet::equidistant(state.range(0)));
  QuadratureConfig q;
  q.execution = ex;
  for (auto _ : state) benchmark::DoNotOptimize(mse(u, nodes, q, false).e2);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ItoExpSerial(benchmark::State& s) { run_mse(s, ito_exp(inv_pi(), 18), QuadratureConfig::Execution::serial); }
void BM_ItoExpParallel(benchmark::State& s) { run_mse(s, ito_exp(inv_pi(), 18), QuadratureConfig::Execution::parallel); }
void BM_AbsLinearSerial(benchmark::State& s) {
  run_mse(s, abs_integrand(TimePoint::exact(1, 2), 50, true), QuadratureConfig::Execution::serial);
}
void BM_AbsLinearParallel(benchmark::State& s) {
  run_mse(s, abs_integrand(TimePoint::exact(1, 2), 50, true), QuadratureConfig::Execution::parallel);
}

void BM_SampleFactors(benchmark::State& state) {
  const auto nodes = std::make_shared<const NodeSet>(NodeSet::equidistant(8));
  const std::vector<Factor> fs = {Factor::path(inv_pi()), Factor::interp(inv_pi(), nodes), Factor::path(TimePoint::exact(1, 1))};
  for (auto _ : state) benchmark::DoNotOptimize(sample_factors(fs, static_cast<std::size_t>(state.range(0)), 1).values.sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ItoExpSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ItoExpParallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AbsLinearSerial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AbsLinearParallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleFactors)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
