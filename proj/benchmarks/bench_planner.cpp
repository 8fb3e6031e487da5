#include <benchmark/benchmark.h>

#include "infsamp/planner.hpp"
#include "infsamp/trace.hpp"

namespace {

std::vector<std::int64_t> lengths(int n, std::uint64_t seed) {
  return infsamp::generate_trace(infsamp::Lognormal{5.0, 0.6}, n, 1024, 0, seed).true_lengths();
}

void BM_FptasPlan(benchmark::State& state) {
  const auto l = lengths(static_cast<int>(state.range(0)), 1);
  const int groups = static_cast<int>(state.range(0) / 4);
  for (auto _ : state) benchmark::DoNotOptimize(infsamp::fptas_plan(l, groups, 0.5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FptasPlan)->RangeMultiplier(4)->Range(32, 8192)->Complexity();

void BM_LptPlan(benchmark::State& state) {
  const auto l = lengths(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(infsamp::lpt_plan(l, 4));
}
BENCHMARK(BM_LptPlan)->RangeMultiplier(4)->Range(32, 8192);

void BM_OptimalMakespan(benchmark::State& state) {
  const auto l = lengths(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(infsamp::optimal_makespan(l, 3));
}
BENCHMARK(BM_OptimalMakespan)->DenseRange(6, 16, 2);

void BM_SjfDrain(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto l = lengths(static_cast<int>(n), 4);
  for (auto _ : state) {
    infsamp::SlotQueueState st(n, 4);
    int slot = 0;
    while (infsamp::sjf_refill(st, slot, l)) slot = (slot + 1) % 4;
  }
}
BENCHMARK(BM_SjfDrain)->RangeMultiplier(4)->Range(32, 2048);

}  // namespace
