#include <benchmark/benchmark.h>

#include "infsamp/engine.hpp"

namespace {

void run(benchmark::State& state, infsamp::Strategy strategy) {
  const int G = static_cast<int>(state.range(0));
  const auto trace = infsamp::generate_trace(infsamp::Lognormal{5.0, 0.6}, G, 1024, 0, 7);
  infsamp::SimConfig cfg;
  cfg.strategy = strategy;
  cfg.micro_size = 4;
  cfg.exact_oracle_limit = 0;
  for (auto _ : state) benchmark::DoNotOptimize(infsamp::simulate(trace, cfg));
  state.counters["tokens"] = benchmark::Counter(static_cast<double>(trace.total_tokens()),
                                                benchmark::Counter::kIsIterationInvariantRate);
}

void BM_Naive(benchmark::State& s) { run(s, infsamp::Strategy::naive); }
void BM_Fixed(benchmark::State& s) { run(s, infsamp::Strategy::fixed); }
void BM_Dynamic(benchmark::State& s) { run(s, infsamp::Strategy::dynamic); }
void BM_Infinite(benchmark::State& s) { run(s, infsamp::Strategy::infinite); }
void BM_Oracle(benchmark::State& s) { run(s, infsamp::Strategy::oracle); }

BENCHMARK(BM_Naive)->Arg(32)->Arg(128);
BENCHMARK(BM_Fixed)->Arg(32)->Arg(128);
BENCHMARK(BM_Dynamic)->Arg(32)->Arg(128);
BENCHMARK(BM_Infinite)->Arg(32)->Arg(128);
BENCHMARK(BM_Oracle)->Arg(32)->Arg(128);

void BM_Replay(benchmark::State& state) {
  const auto trace = infsamp::generate_trace(infsamp::Lognormal{5.0, 0.6}, 128, 1024, 0, 9);
  infsamp::SimConfig cfg;
  cfg.strategy = infsamp::Strategy::infinite;
  cfg.micro_size = 4;
  const auto result = infsamp::simulate(trace, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(infsamp::replay_schedule(result));
}
BENCHMARK(BM_Replay);

}  // namespace
