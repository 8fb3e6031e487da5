#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infsamp/planner.hpp"
#include "infsamp/trace.hpp"

namespace infsamp {

enum class Strategy { full, naive, fixed, dynamic, infinite, oracle };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

/// How `infinite` partitions predicted work before decoding: into N = G/g
/// micro groups, or directly into g slot bins.
enum class BinMode { groups, slots };

std::string_view to_string(BinMode mode);
BinMode parse_bin_mode(std::string_view text);

/// Candidate source for `dynamic`: re-sample `dist` (seeded by
/// SimConfig::dynamic_stream_seed); when unset the trace itself is cycled.
struct DynamicStream {
  LengthDistribution dist;
  std::int64_t max_len = 1024;
};

struct SimConfig {
  Strategy strategy = Strategy::naive;
  /// G. Zero means "take it from the trace"; otherwise it must match.
  int group_size = 0;
  /// g, the number of concurrent decoding slots.
  int micro_size = 1;
  double epsilon = 0.5;
  PredictorConfig predictor;
  bool count_prefix_steps = true;
  bool retain_prefix_kv = true;
  BinMode bin_mode = BinMode::groups;
  /// Ablation switches for `infinite`: without the plan, slots start in
  /// trace order; without SJF, freed slots take the next sample in plan
  /// order under the fixed-slot quota.
  bool use_plan = true;
  bool use_sjf = true;
  std::optional<DynamicStream> dynamic_stream;
  std::uint64_t dynamic_stream_seed = 0;
  /// Mixed into the predictor seed.
  std::uint64_t seed = 0;
  /// `oracle` uses exact search up to this many samples, LPT beyond.
  std::size_t exact_oracle_limit = kDefaultExactJobLimit;
};

enum class EventKind { start, token, finish, refill, idle };

std::string_view to_string(EventKind kind);

/// One schedule log entry. `sample` is -1 for idle events. A `refill` entry
/// is logged on the step the slot was freed; the new sample's `start` and
/// first `token` follow on the next step.
struct ScheduleEvent {
  std::int64_t step = 0;
  int slot = 0;
  EventKind kind = EventKind::token;
  int sample = -1;

  friend bool operator==(const ScheduleEvent&, const ScheduleEvent&) = default;
};

struct SampleOutcome {
  int id = 0;
  std::int64_t start_step = 0;
  std::int64_t finish_step = 0;
  std::int64_t emitted_len = 0;

  friend bool operator==(const SampleOutcome&, const SampleOutcome&) = default;
};

struct SimResult {
  Strategy strategy = Strategy::naive;
  std::int64_t total_steps = 0;
  /// Completed samples ordered by id. For `dynamic`, ids index the stream.
  std::vector<SampleOutcome> per_sample;
  double avg_emitted_len = 0.0;
  /// prompt_len + peak concurrent response tokens held.
  std::int64_t peak_kv_tokens = 0;
  std::vector<ScheduleEvent> schedule_log;
  std::vector<int> discarded_ids;

  // Context needed to replay the log.
  std::int64_t prompt_len = 0;
  int slot_count = 0;
  std::int64_t prefix_k = 0;
  /// Steps spent in the barriered prefix phase (0 when k = 0). Log step
  /// numbers always include them; total_steps does only if they are counted.
  std::int64_t prefix_steps = 0;
  bool retain_prefix_kv = true;

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

SimResult simulate(const Trace& trace, const SimConfig& cfg);

struct LowerBoundOptions {
  std::int64_t prefix_k = 0;
  bool count_prefix_steps = true;
};

/// max(max len, ceil(sum / g)) when k = 0. With a prefix phase, the
/// barriered prefix rounds plus the same bound over the remaining work.
std::int64_t step_lower_bound(const Trace& trace, int n_slots, const LowerBoundOptions& opts = {});

/// Bound for the strategy in `cfg` (G slots for `full`; prefix only for
/// `infinite`). Not meaningful for `dynamic`.
std::int64_t step_lower_bound(const Trace& trace, const SimConfig& cfg);

/// Per-step occupancy reconstructed from a schedule log; index t-1 is step t.
struct Occupancy {
  std::vector<int> active_slots;
  std::vector<std::int64_t> kv_tokens;
  std::int64_t tokens_decoded = 0;

  std::int64_t peak_tokens() const;
};

/// Throws IntegrityError when the log is inconsistent with itself or with
/// the result's per-sample outcomes.
Occupancy replay_schedule(const SimResult& result);

// ---------------------------------------------------------------------------
// Strategy comparison (running steps and average emitted length)

enum class SchedulerVariant { fifo, fptas_only, sjf_only, infinite };

std::string_view to_string(SchedulerVariant variant);
SchedulerVariant parse_scheduler_variant(std::string_view text);

/// fifo = `fixed`; fptas-only = plan start + FIFO refill in plan order;
/// sjf-only = trace-order start + SJF refill; infinite = plan + SJF.
SimConfig scheduler_config(SimConfig base, SchedulerVariant variant);

struct ComparisonRow {
  std::string label;
  std::int64_t total_steps = 0;
  double step_ratio = 1.0;
  double avg_len = 0.0;
  double len_ratio = 1.0;
  std::int64_t peak_kv_tokens = 0;
};

/// Ratios are relative to the `naive` row when present, otherwise the first.
std::vector<ComparisonRow> run_comparison(const Trace& trace, const SimConfig& base,
                                          std::span<const Strategy> strategies);

/// Ratios are relative to the `fifo` row when present, otherwise the first.
std::vector<ComparisonRow> run_scheduler_comparison(const Trace& trace, const SimConfig& base,
                                                    std::span<const SchedulerVariant> variants);

// ---------------------------------------------------------------------------
// Export

/// JSON object with the SimResult fields; the schedule log only on request.
std::string sim_result_to_json(const SimResult& result, bool include_log);

}  // namespace infsamp
