// Serial vs OpenMP greedy, and the comparison schemes, on the 32x64 fabric.

#include <benchmark/benchmark.h>

#include "closroute/routing.hpp"
#include "closroute/sim.hpp"

namespace {

using namespace closroute;

const ClosTopology& fabric() {
  static const ClosTopology topo = build_topology(32, 64, 4, 8, 100e9);
  return topo;
}

template <typename Fn>
void run_scheme(benchmark::State& state, Fn&& fn) {
  const auto commodities = random_inter_tor_commodities(fabric(), static_cast<std::size_t>(state.range(0)), 42);
  for (auto _ : state) {
    auto choice = fn(commodities);
    benchmark::DoNotOptimize(choice);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GreedySerial(benchmark::State& state) {
  run_scheme(state, [](const auto& c) { return greedy_assign(c, fabric()); });
}

void BM_GreedyParallel(benchmark::State& state) {
  run_scheme(state, [](const auto& c) { return greedy_assign_parallel(c, fabric()); });
}

void BM_Ecmp(benchmark::State& state) {
  run_scheme(state, [](const auto& c) { return ecmp_assign(c, fabric(), 1); });
}

void BM_EdgeColoring(benchmark::State& state) {
  run_scheme(state, [](const auto& c) { return edge_color_assign(c, fabric()); });
}

void BM_Annealing(benchmark::State& state) {
  run_scheme(state, [](const auto& c) { return anneal_assign(c, fabric(), AnnealSchedule{}, 1); });
}

// Sparse traffic splits into many components, which is where the parallel
// variant can win.
void BM_GreedyParallelSparse(benchmark::State& state) {
  std::vector<CommoditySpec> commodities;
  const int pairs = static_cast<int>(state.range(0));
  for (int k = 0; k < pairs; ++k) {
    const int src = (2 * k) % 64;
    commodities.push_back({"c" + std::to_string(k), "b", {src, k % 4, 0}, {(src + 1) % 64, k % 4, 1}, 1});
  }
  for (auto _ : state) {
    auto choice = greedy_assign_parallel(commodities, fabric());
    benchmark::DoNotOptimize(choice);
  }
}

}  // namespace

BENCHMARK(BM_GreedySerial)->Arg(100)->Arg(500)->Arg(1000)->Arg(1500)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GreedyParallel)->Arg(100)->Arg(500)->Arg(1000)->Arg(1500)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GreedyParallelSparse)->Arg(32)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Ecmp)->Arg(1500)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EdgeColoring)->Arg(100)->Arg(1500)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Annealing)->Arg(100)->Arg(1500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
