#include <benchmark/benchmark.h>

#include "bulwark/composer.hpp"
#include "bulwark/program.hpp"

namespace {

void BM_compose(benchmark::State& state) {
  auto program = bulwark::generate_program(23, static_cast<int>(state.range(0)), 3, 0.6);
  bulwark::CompositionConfig config;
  config.time_limit_s = 30.0;
  for (auto _ : state) {
    auto result = bulwark::compose(program, config);
    benchmark::DoNotOptimize(result.objective_value);
  }
}

}  // namespace

BENCHMARK(BM_compose)->Arg(3)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
