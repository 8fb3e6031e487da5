#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "infsamp/engine.hpp"
#include "infsamp/error.hpp"

namespace infsamp {
namespace {

using Lens = std::vector<std::int64_t>;

const Lens kWorked{5, 3, 4, 2};

SimResult run(const Lens& l, Strategy s, int g, std::int64_t prompt = 0) {
  SimConfig cfg;
  cfg.strategy = s;
  cfg.micro_size = g;
  return simulate(make_trace(l, prompt), cfg);
}

std::int64_t finish_of(const SimResult& r, int id) {
  for (const auto& o : r.per_sample) {
    if (o.id == id) return o.finish_step;
  }
  return -1;
}

TEST(Simulate, WorkedExampleStepCounts) {
  EXPECT_EQ(run(kWorked, Strategy::full, 2).total_steps, 5);
  EXPECT_EQ(run(kWorked, Strategy::naive, 2).total_steps, 9);
  EXPECT_EQ(run(kWorked, Strategy::fixed, 2).total_steps, 7);
  EXPECT_EQ(run(kWorked, Strategy::oracle, 2).total_steps, 7);
  EXPECT_EQ(run(kWorked, Strategy::infinite, 2).total_steps, 9);
}

TEST(Simulate, FixedHandTrace) {
  const auto r = run(kWorked, Strategy::fixed, 2);
  EXPECT_EQ(finish_of(r, 0), 5);
  EXPECT_EQ(finish_of(r, 1), 3);
  EXPECT_EQ(finish_of(r, 2), 7);
  EXPECT_EQ(finish_of(r, 3), 7);
}

TEST(Simulate, InfiniteHandTrace) {
  const auto r = run(kWorked, Strategy::infinite, 2);
  EXPECT_EQ(finish_of(r, 1), 3);
  EXPECT_EQ(finish_of(r, 3), 5);
  EXPECT_EQ(finish_of(r, 0), 5);
  EXPECT_EQ(finish_of(r, 2), 9);
  // slots start with samples 0 and 1
  int started = 0;
  for (const auto& e : r.schedule_log) {
    if (e.step == 1 && e.kind == EventKind::start) {
      EXPECT_EQ(e.sample, e.slot);
      ++started;
    }
  }
  EXPECT_EQ(started, 2);
}

TEST(Simulate, RefillIsLoggedOnTheFreeingStep) {
  const auto r = run(kWorked, Strategy::fixed, 2);
  bool found = false;
  for (const auto& e : r.schedule_log) {
    if (e.kind == EventKind::refill && e.sample == 2) {
      EXPECT_EQ(e.step, 3);
      EXPECT_EQ(e.slot, 1);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Simulate, AvgLengthIsTraceMean) {
  for (auto s : {Strategy::full, Strategy::naive, Strategy::fixed, Strategy::infinite, Strategy::oracle}) {
    EXPECT_DOUBLE_EQ(run(kWorked, s, 2).avg_emitted_len, 3.5) << to_string(s);
  }
}

TEST(Simulate, PeakTokens) {
  EXPECT_EQ(run(Lens{3}, Strategy::naive, 1).peak_kv_tokens, 3);
  EXPECT_LE(run(kWorked, Strategy::fixed, 2).peak_kv_tokens, 2 * 5);
  EXPECT_EQ(run(Lens{2, 2}, Strategy::full, 2).peak_kv_tokens, 4);
  EXPECT_EQ(run(Lens{2, 2}, Strategy::full, 2, 100).peak_kv_tokens, 104);
}

TEST(Simulate, FixedQuota) {
  const Lens l{1, 9, 1, 1, 1, 1};
  const auto r = run(l, Strategy::fixed, 2);
  std::map<int, int> per_slot;
  for (const auto& e : r.schedule_log) {
    if (e.kind == EventKind::finish) ++per_slot[e.slot];
  }
  int total = 0;
  for (const auto& [slot, n] : per_slot) {
    EXPECT_LE(n, 3) << "slot " << slot;
    total += n;
  }
  EXPECT_EQ(total, 6);
  // slot 0 runs its three short samples and then idles while slot 1 holds
  // the long one and its remaining quota.
  EXPECT_EQ(r.total_steps, 11);
}

TEST(Simulate, DynamicStopsAtGthCompletion) {
  SimConfig cfg;
  cfg.strategy = Strategy::dynamic;
  cfg.micro_size = 2;
  const auto r = simulate(make_trace(Lens{10, 1, 1, 1}), cfg);
  // stream cycles [10,1,1,1,10,...]; slot 1 drains the shorts, then picks up
  // the second 10 at step 4, still in flight when sample 0 completes at step 10
  EXPECT_EQ(r.per_sample.size(), 4u);
  EXPECT_EQ(r.total_steps, 10);
  EXPECT_EQ(r.discarded_ids, (std::vector<int>{4}));
  EXPECT_DOUBLE_EQ(r.avg_emitted_len, 13.0 / 4.0);
}

TEST(Simulate, DynamicStreamIsSeeded) {
  SimConfig cfg;
  cfg.strategy = Strategy::dynamic;
  cfg.micro_size = 4;
  cfg.dynamic_stream = DynamicStream{Lognormal{5.0, 0.6}, 1024};
  cfg.dynamic_stream_seed = 5;
  const auto t = generate_trace(Lognormal{5.0, 0.6}, 32, 1024, 0, 5);
  const auto a = simulate(t, cfg);
  EXPECT_EQ(a, simulate(t, cfg));
  EXPECT_EQ(a.per_sample.size(), 32u);
  cfg.dynamic_stream_seed = 6;
  const auto b = simulate(t, cfg);
  EXPECT_NE(a.per_sample, b.per_sample);
}

TEST(Simulate, PrefixPhaseAccounting) {
  SimConfig cfg;
  cfg.strategy = Strategy::infinite;
  cfg.micro_size = 2;
  cfg.predictor.prefix_k = 2;
  const auto t = make_trace(kWorked);
  const auto counted = simulate(t, cfg);
  EXPECT_EQ(counted.prefix_steps, 4);  // 2 rounds of 2 tokens
  cfg.count_prefix_steps = false;
  const auto excluded = simulate(t, cfg);
  EXPECT_EQ(excluded.total_steps, counted.total_steps - 4);
  EXPECT_DOUBLE_EQ(counted.avg_emitted_len, 3.5);
  EXPECT_GE(counted.total_steps, step_lower_bound(t, cfg.micro_size, {2, true}));
}

TEST(Simulate, SamplesShorterThanPrefixFinishInPrefix) {
  SimConfig cfg;
  cfg.strategy = Strategy::infinite;
  cfg.micro_size = 2;
  cfg.predictor.prefix_k = 3;
  const auto r = simulate(make_trace(Lens{2, 1, 9, 3}), cfg);
  EXPECT_LE(finish_of(r, 0), r.prefix_steps);
  EXPECT_LE(finish_of(r, 1), r.prefix_steps);
  EXPECT_LE(finish_of(r, 3), r.prefix_steps);
  EXPECT_EQ(r.per_sample.size(), 4u);
}

TEST(Simulate, SlotsBinMode) {
  SimConfig cfg;
  cfg.strategy = Strategy::infinite;
  cfg.micro_size = 2;
  cfg.bin_mode = BinMode::slots;
  const auto r = simulate(make_trace(kWorked), cfg);
  EXPECT_GE(r.total_steps, 7);
  EXPECT_EQ(r.per_sample.size(), 4u);
}

TEST(Simulate, ConfigErrors) {
  const auto t = make_trace(kWorked);
  SimConfig cfg;
  cfg.micro_size = 3;
  for (auto s : {Strategy::naive, Strategy::fixed, Strategy::infinite}) {
    cfg.strategy = s;
    EXPECT_THROW(simulate(t, cfg), ConfigError) << to_string(s);
  }
  cfg.strategy = Strategy::oracle;
  EXPECT_NO_THROW(simulate(t, cfg));
  cfg.micro_size = 0;
  EXPECT_THROW(simulate(t, cfg), ConfigError);
  cfg.micro_size = 2;
  cfg.group_size = 8;
  EXPECT_THROW(simulate(t, cfg), ConfigError);
  cfg.group_size = 0;
  cfg.strategy = Strategy::infinite;
  cfg.epsilon = 0;
  EXPECT_THROW(simulate(t, cfg), ConfigError);
  cfg.epsilon = 0.5;
  cfg.predictor.kind = PredictorKind::file;
  EXPECT_THROW(simulate(t, cfg), DataError);
}

TEST(Simulate, Deterministic) {
  SimConfig cfg;
  cfg.strategy = Strategy::infinite;
  cfg.micro_size = 4;
  cfg.predictor.kind = PredictorKind::noisy;
  cfg.predictor.noise_sigma = 0.3;
  cfg.seed = 99;
  const auto t = generate_trace(Lognormal{5.0, 0.6}, 32, 1024, 0, 1);
  EXPECT_EQ(simulate(t, cfg), simulate(t, cfg));
}

TEST(StepLowerBound, Examples) {
  EXPECT_EQ(step_lower_bound(make_trace(kWorked), 2), 7);
  EXPECT_EQ(step_lower_bound(make_trace(Lens{9, 1}), 2), 9);
  EXPECT_EQ(step_lower_bound(make_trace(kWorked), 1), 14);
}

TEST(StepLowerBound, PrefixOnSingleSample) {
  // A single sample of 5 with k = 2 still needs exactly 5 steps.
  EXPECT_EQ(step_lower_bound(make_trace(Lens{5}), 1, {2, true}), 5);
  EXPECT_EQ(step_lower_bound(make_trace(Lens{5}), 1, {2, false}), 3);
}

TEST(Comparison, RatiosAgainstNaive) {
  const auto t = make_trace(kWorked);
  SimConfig base;
  base.micro_size = 2;
  const std::vector<Strategy> two{Strategy::naive, Strategy::fixed};
  const auto rows = run_comparison(t, base, two);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].total_steps, 9);
  EXPECT_DOUBLE_EQ(rows[0].step_ratio, 1.0);
  EXPECT_EQ(rows[1].total_steps, 7);
  EXPECT_NEAR(rows[1].step_ratio, 0.78, 0.005);
  EXPECT_DOUBLE_EQ(rows[1].len_ratio, 1.0);

  const std::vector<Strategy> with_oracle{Strategy::naive, Strategy::oracle};
  EXPECT_DOUBLE_EQ(run_comparison(t, base, with_oracle)[1].step_ratio, 7.0 / 9.0);

  const std::vector<Strategy> alone{Strategy::oracle};
  EXPECT_DOUBLE_EQ(run_comparison(t, base, alone)[0].step_ratio, 1.0);
  const std::vector<Strategy> naive_only{Strategy::naive};
  EXPECT_DOUBLE_EQ(run_comparison(t, base, naive_only)[0].step_ratio, 1.0);
}

TEST(Comparison, SchedulerVariants) {
  EXPECT_EQ(parse_scheduler_variant("fptas-only"), SchedulerVariant::fptas_only);
  EXPECT_THROW(parse_scheduler_variant("lpt"), ConfigError);
  const auto fifo = scheduler_config({}, SchedulerVariant::fifo);
  EXPECT_EQ(fifo.strategy, Strategy::fixed);
  const auto sjf = scheduler_config({}, SchedulerVariant::sjf_only);
  EXPECT_EQ(sjf.strategy, Strategy::infinite);
  EXPECT_FALSE(sjf.use_plan);
  EXPECT_TRUE(sjf.use_sjf);
  const auto fptas = scheduler_config({}, SchedulerVariant::fptas_only);
  EXPECT_TRUE(fptas.use_plan);
  EXPECT_FALSE(fptas.use_sjf);
}

TEST(Export, JsonLayout) {
  const auto r = run(Lens{2}, Strategy::naive, 1);
  const auto without = sim_result_to_json(r, false);
  EXPECT_EQ(without.find("schedule_log"), std::string::npos);
  EXPECT_NE(without.find("\"total_steps\": 2"), std::string::npos);
  const auto with = sim_result_to_json(r, true);
  EXPECT_NE(with.find("\"event\": \"finish\""), std::string::npos);
}

TEST(Strategy, ParseRoundTrip) {
  for (auto s : {Strategy::full, Strategy::naive, Strategy::fixed, Strategy::dynamic, Strategy::infinite,
                 Strategy::oracle}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_THROW(parse_strategy("greedy"), ConfigError);
  EXPECT_THROW(parse_bin_mode("rows"), ConfigError);
}

}  // namespace
}  // namespace infsamp
