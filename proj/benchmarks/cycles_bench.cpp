#include <benchmark/benchmark.h>

#include "bulwark/defense_graph.hpp"
#include "bulwark/passes.hpp"
#include "bulwark/program.hpp"

namespace {

void BM_build_graph(benchmark::State& state) {
  auto program = bulwark::generate_program(7, static_cast<int>(state.range(0)), 4, 0.5);
  bulwark::PassConfig pass_config;
  auto manifests = bulwark::propose_all(program, pass_config);
  for (auto _ : state) {
    auto graph = bulwark::build_graph(manifests, program);
    benchmark::DoNotOptimize(graph.dependency_arcs.size());
  }
  state.counters["manifests"] = static_cast<double>(manifests.size());
}

void BM_find_cycles(benchmark::State& state) {
  auto program = bulwark::generate_program(7, static_cast<int>(state.range(0)), 4, 0.5);
  bulwark::PassConfig pass_config;
  auto manifests = bulwark::propose_all(program, pass_config);
  auto graph = bulwark::build_graph(manifests, program);
  for (auto _ : state) {
    auto cycles = bulwark::find_cycles(graph);
    benchmark::DoNotOptimize(cycles.size());
  }
  state.counters["nodes"] = static_cast<double>(graph.nodes.size());
}

}  // namespace

BENCHMARK(BM_build_graph)->Arg(4)->Arg(8)->Arg(16);
BENCHMARK(BM_find_cycles)->Arg(4)->Arg(8)->Arg(16);

BENCHMARK_MAIN();
