#include <benchmark/benchmark.h>

#include <cmath>

#include "cgnf/quadrature.hpp"

namespace {

void BM_ClenshawCurtisBuild(benchmark::State& state) {
  for (auto _ : state) {
    auto rule = cgnf::clenshaw_curtis(static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(rule.weights.data());
  }
}
BENCHMARK(BM_ClenshawCurtisBuild)->Arg(8)->Arg(32)->Arg(128);

void BM_Integrate(benchmark::State& state) {
  const auto rule = cgnf::clenshaw_curtis(static_cast<int>(state.range(0)));
  const auto f = [](double t) { return std::exp(-t * t); };
  for (auto _ : state) {
    double v = cgnf::integrate(f, 1.7, rule);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_Integrate)->Arg(8)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
