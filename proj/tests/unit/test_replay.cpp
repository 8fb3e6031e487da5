#include <gtest/gtest.h>

#include "infsamp/engine.hpp"
#include "infsamp/error.hpp"

namespace infsamp {
namespace {

using Lens = std::vector<std::int64_t>;

SimResult run(const Lens& l, Strategy s, int g) {
  SimConfig cfg;
  cfg.strategy = s;
  cfg.micro_size = g;
  return simulate(make_trace(l), cfg);
}

TEST(Replay, FullOnTwoEqualSamples) {
  const auto occ = replay_schedule(run(Lens{2, 2}, Strategy::full, 2));
  EXPECT_EQ(occ.active_slots, (std::vector<int>{2, 2}));
  EXPECT_EQ(occ.kv_tokens, (std::vector<std::int64_t>{2, 4}));
  EXPECT_EQ(occ.peak_tokens(), 4);
  EXPECT_EQ(occ.tokens_decoded, 4);
}

TEST(Replay, NaiveBarrierReleasesRound) {
  const auto occ = replay_schedule(run(Lens{3, 1, 2, 2}, Strategy::naive, 2));
  EXPECT_EQ(occ.active_slots, (std::vector<int>{2, 1, 1, 2, 2}));
  EXPECT_EQ(occ.kv_tokens, (std::vector<std::int64_t>{2, 2, 3, 2, 4}));
}

TEST(Replay, MatchesEnginePeak) {
  const auto t = generate_trace(Lognormal{4.0, 0.8}, 24, 512, 7, 3);
  for (auto s : {Strategy::full, Strategy::naive, Strategy::fixed, Strategy::infinite, Strategy::oracle,
                 Strategy::dynamic}) {
    SimConfig cfg;
    cfg.strategy = s;
    cfg.micro_size = 4;
    cfg.exact_oracle_limit = 0;
    const auto r = simulate(t, cfg);
    const auto occ = replay_schedule(r);
    EXPECT_EQ(occ.peak_tokens() + t.prompt_len, r.peak_kv_tokens) << to_string(s);
  }
}

TEST(Replay, PrefixKvRetentionChangesOccupancy) {
  SimConfig cfg;
  cfg.strategy = Strategy::infinite;
  cfg.micro_size = 2;
  cfg.predictor.prefix_k = 2;
  const auto t = make_trace(Lens{6, 5, 4, 3});
  const auto kept = simulate(t, cfg);
  cfg.retain_prefix_kv = false;
  const auto dropped = simulate(t, cfg);
  EXPECT_EQ(replay_schedule(kept).peak_tokens(), kept.peak_kv_tokens);
  EXPECT_EQ(replay_schedule(dropped).peak_tokens(), dropped.peak_kv_tokens);
  EXPECT_LE(dropped.peak_kv_tokens, kept.peak_kv_tokens);
  EXPECT_EQ(kept.total_steps, dropped.total_steps);
}

TEST(Replay, DetectsTamperedLog) {
  auto r = run(Lens{3, 2}, Strategy::fixed, 1);

  auto dup = r;
  dup.schedule_log.push_back(dup.schedule_log.back());
  EXPECT_THROW(replay_schedule(dup), IntegrityError);

  auto gap = r;
  for (auto& e : gap.schedule_log) {
    if (e.step >= 2) ++e.step;
  }
  EXPECT_THROW(replay_schedule(gap), IntegrityError);

  auto bad_slot = r;
  bad_slot.schedule_log.front().slot = 5;
  EXPECT_THROW(replay_schedule(bad_slot), IntegrityError);

  auto bad_outcome = r;
  bad_outcome.per_sample.front().emitted_len += 1;
  EXPECT_THROW(replay_schedule(bad_outcome), IntegrityError);

  auto bad_total = r;
  bad_total.total_steps += 1;
  EXPECT_THROW(replay_schedule(bad_total), IntegrityError);
}

}  // namespace
}  // namespace infsamp
