#include "infsamp/engine.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>

#include "infsamp/error.hpp"

namespace infsamp {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::full: return "full";
    case Strategy::naive: return "naive";
    case Strategy::fixed: return "fixed";
    case Strategy::dynamic: return "dynamic";
    case Strategy::infinite: return "infinite";
    case Strategy::oracle: return "oracle";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  for (auto s : {Strategy::full, Strategy::naive, Strategy::fixed, Strategy::dynamic, Strategy::infinite,
                 Strategy::oracle}) {
    if (text == to_string(s)) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(text) +
                    "' (expected full, naive, fixed, dynamic, infinite or oracle)");
}

std::string_view to_string(BinMode mode) { return mode == BinMode::groups ? "groups" : "slots"; }

BinMode parse_bin_mode(std::string_view text) {
  if (text == "groups") return BinMode::groups;
  if (text == "slots") return BinMode::slots;
  throw ConfigError("unknown bin mode '" + std::string(text) + "' (expected groups or slots)");
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::start: return "start";
    case EventKind::token: return "token";
    case EventKind::finish: return "finish";
    case EventKind::refill: return "refill";
    case EventKind::idle: return "idle";
  }
  return "unknown";
}

namespace {

using RefillFn = std::function<std::optional<int>(int slot)>;

// One stretch of slot-parallel decoding. A phase ends when every slot is
// empty, or right after the step on which `stop` first returns true.
struct Phase {
  int n_slots = 1;
  std::vector<std::optional<int>> initial;
  std::function<std::int64_t(int)> work;
  RefillFn refill;
  std::optional<std::int64_t> quota;
  /// Called once per sample that emits its last token; false discards it.
  std::function<bool(int)> accept;
  std::function<bool()> stop;
  bool log_idle = true;
};

enum class SampleState : std::uint8_t { pending, active, paused, finished, discarded };

// Step-synchronous decoder shared by every strategy: one token per occupied
// slot per step, with KV occupancy tracked as samples start, pause and finish.
class Decoder {
public:
  Decoder(std::int64_t prompt_len, bool retain_prefix_kv)
      : prompt_len_(prompt_len), retain_(retain_prefix_kv) {}

  int add_sample(std::int64_t true_len) {
    true_len_.push_back(true_len);
    decoded_.push_back(0);
    start_step_.push_back(0);
    finish_step_.push_back(0);
    state_.push_back(SampleState::pending);
    return static_cast<int>(true_len_.size()) - 1;
  }

  std::int64_t step() const { return step_; }
  std::int64_t true_len(int id) const { return true_len_[idx(id)]; }
  std::int64_t decoded(int id) const { return decoded_[idx(id)]; }

  /// Returns samples still occupying a slot when the phase stopped early.
  std::vector<int> run(const Phase& phase) {
    const auto n = static_cast<std::size_t>(phase.n_slots);
    std::vector<std::optional<int>> current(n);
    std::vector<std::int64_t> remaining(n, 0);
    std::vector<std::int64_t> assigned(n, 0);
    std::vector<bool> fresh(n, false);

    auto under_quota = [&](std::size_t s) { return !phase.quota || assigned[s] < *phase.quota; };
    auto assign = [&](std::size_t s, int id) {
      const auto w = phase.work(id);
      if (w < 1) throw IntegrityError("sample " + std::to_string(id) + " scheduled with no work left");
      current[s] = id;
      remaining[s] = w;
      ++assigned[s];
      fresh[s] = true;
    };

    for (std::size_t s = 0; s < n; ++s) {
      if (s < phase.initial.size() && phase.initial[s]) {
        assign(s, *phase.initial[s]);
      } else if (phase.refill && under_quota(s)) {
        if (auto id = phase.refill(static_cast<int>(s))) assign(s, *id);
      }
    }

    auto any_active = [&] {
      return std::any_of(current.begin(), current.end(), [](const auto& c) { return c.has_value(); });
    };

    while (any_active()) {
      ++step_;
      for (std::size_t s = 0; s < n; ++s) {
        if (!current[s]) {
          if (phase.log_idle) log(s, EventKind::idle, -1);
          continue;
        }
        const int id = *current[s];
        if (fresh[s]) {
          begin(id);
          log(s, EventKind::start, id);
          fresh[s] = false;
        }
        ++decoded_[idx(id)];
        ++held_;
        log(s, EventKind::token, id);
        --remaining[s];
      }
      peak_ = std::max(peak_, held_);

      std::vector<std::size_t> freed;
      for (std::size_t s = 0; s < n; ++s) {
        if (!current[s] || remaining[s] > 0) continue;
        const int id = *current[s];
        current[s].reset();
        freed.push_back(s);
        if (decoded_[idx(id)] < true_len_[idx(id)]) {
          state_[idx(id)] = SampleState::paused;
          if (!retain_) held_ -= decoded_[idx(id)];
          continue;
        }
        held_ -= decoded_[idx(id)];
        if (!phase.accept || phase.accept(id)) {
          state_[idx(id)] = SampleState::finished;
          finish_step_[idx(id)] = step_;
          log(s, EventKind::finish, id);
        } else {
          state_[idx(id)] = SampleState::discarded;
        }
      }

      if (phase.stop && phase.stop()) {
        std::vector<int> in_flight;
        for (const auto& c : current) {
          if (c) in_flight.push_back(*c);
        }
        return in_flight;
      }

      if (phase.refill) {
        for (auto s : freed) {
          if (!under_quota(s)) continue;
          if (auto id = phase.refill(static_cast<int>(s))) {
            log(s, EventKind::refill, *id);
            assign(s, *id);
          }
        }
      }
    }
    return {};
  }

  void discard(int id) { state_[idx(id)] = SampleState::discarded; }

  SimResult finish(Strategy strategy, int slot_count) && {
    SimResult r;
    r.strategy = strategy;
    r.total_steps = step_;
    r.peak_kv_tokens = prompt_len_ + peak_;
    r.schedule_log = std::move(log_);
    r.prompt_len = prompt_len_;
    r.slot_count = slot_count;
    r.retain_prefix_kv = retain_;
    std::int64_t emitted = 0;
    for (std::size_t i = 0; i < state_.size(); ++i) {
      if (state_[i] == SampleState::finished) {
        r.per_sample.push_back(
            SampleOutcome{static_cast<int>(i), start_step_[i], finish_step_[i], decoded_[i]});
        emitted += decoded_[i];
      } else if (state_[i] == SampleState::discarded) {
        r.discarded_ids.push_back(static_cast<int>(i));
      } else if (state_[i] != SampleState::pending || decoded_[i] != 0) {
        throw IntegrityError("sample " + std::to_string(i) + " left unfinished");
      }
    }
    if (!r.per_sample.empty()) {
      r.avg_emitted_len = static_cast<double>(emitted) / static_cast<double>(r.per_sample.size());
    }
    return r;
  }

private:
  static std::size_t idx(int id) { return static_cast<std::size_t>(id); }

  void begin(int id) {
    auto& st = state_[idx(id)];
    if (st == SampleState::pending) {
      start_step_[idx(id)] = step_;
    } else if (st == SampleState::paused) {
      if (!retain_) held_ += decoded_[idx(id)];
    } else {
      throw IntegrityError("sample " + std::to_string(id) + " started twice");
    }
    st = SampleState::active;
  }

  void log(std::size_t slot, EventKind kind, int id) {
    log_.push_back(ScheduleEvent{step_, static_cast<int>(slot), kind, id});
  }

  std::int64_t prompt_len_;
  bool retain_;
  std::int64_t step_ = 0;
  std::int64_t held_ = 0;
  std::int64_t peak_ = 0;
  std::vector<std::int64_t> true_len_;
  std::vector<std::int64_t> decoded_;
  std::vector<std::int64_t> start_step_;
  std::vector<std::int64_t> finish_step_;
  std::vector<SampleState> state_;
  std::vector<ScheduleEvent> log_;
};

Decoder make_decoder(const Trace& trace, bool retain) {
  Decoder d(trace.prompt_len, retain);
  for (const auto& s : trace.samples) d.add_sample(s.true_len);
  return d;
}

std::vector<std::optional<int>> leading(std::span<const int> ids, int n_slots) {
  std::vector<std::optional<int>> out(static_cast<std::size_t>(n_slots));
  for (std::size_t s = 0; s < out.size() && s < ids.size(); ++s) out[s] = ids[s];
  return out;
}

// Next not-yet-started entry of a fixed order.
class OrderedCursor {
public:
  explicit OrderedCursor(std::vector<int> order) : order_(std::move(order)) {}

  std::optional<int> next(const std::function<bool(int)>& started) {
    while (at_ < order_.size() && started(order_[at_])) ++at_;
    if (at_ == order_.size()) return std::nullopt;
    return order_[at_++];
  }

private:
  std::vector<int> order_;
  std::size_t at_ = 0;
};

void run_rounds(Decoder& d, std::span<const int> ids, int g, const std::function<std::int64_t(int)>& work) {
  for (std::size_t first = 0; first < ids.size(); first += static_cast<std::size_t>(g)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(g), ids.size() - first);
    Phase round;
    round.n_slots = g;
    round.initial = leading(ids.subspan(first, count), g);
    round.work = work;
    d.run(round);
  }
}

std::vector<int> iota_ids(std::size_t n) {
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

SimResult simulate_full(const Trace& trace, const SimConfig& cfg) {
  auto d = make_decoder(trace, cfg.retain_prefix_kv);
  const auto ids = iota_ids(trace.group_size());
  Phase p;
  p.n_slots = static_cast<int>(ids.size());
  p.initial = leading(ids, p.n_slots);
  p.work = [&](int id) { return d.true_len(id); };
  p.log_idle = false;
  d.run(p);
  return std::move(d).finish(Strategy::full, p.n_slots);
}

SimResult simulate_naive(const Trace& trace, const SimConfig& cfg) {
  auto d = make_decoder(trace, cfg.retain_prefix_kv);
  const auto ids = iota_ids(trace.group_size());
  run_rounds(d, ids, cfg.micro_size, [&](int id) { return d.true_len(id); });
  return std::move(d).finish(Strategy::naive, cfg.micro_size);
}

SimResult simulate_fixed(const Trace& trace, const SimConfig& cfg) {
  auto d = make_decoder(trace, cfg.retain_prefix_kv);
  const auto G = trace.group_size();
  const int g = cfg.micro_size;
  std::vector<bool> started(G, false);
  OrderedCursor fifo(iota_ids(G));
  auto is_started = [&](int id) { return started[static_cast<std::size_t>(id)]; };

  Phase p;
  p.n_slots = g;
  p.work = [&](int id) { return d.true_len(id); };
  p.quota = static_cast<std::int64_t>(G) / g;
  p.refill = [&](int) -> std::optional<int> {
    auto id = fifo.next(is_started);
    if (id) started[static_cast<std::size_t>(*id)] = true;
    return id;
  };
  d.run(p);
  return std::move(d).finish(Strategy::fixed, g);
}

SimResult simulate_oracle(const Trace& trace, const SimConfig& cfg) {
  auto d = make_decoder(trace, cfg.retain_prefix_kv);
  const auto lengths = trace.true_lengths();
  const int g = cfg.micro_size;
  const auto schedule = lengths.size() <= cfg.exact_oracle_limit
                            ? optimal_schedule(lengths, g, cfg.exact_oracle_limit)
                            : lpt_plan(lengths, g);
  std::vector<std::size_t> cursor(static_cast<std::size_t>(g), 0);

  Phase p;
  p.n_slots = g;
  p.work = [&](int id) { return d.true_len(id); };
  p.refill = [&](int slot) -> std::optional<int> {
    const auto s = static_cast<std::size_t>(slot);
    const auto& queue = schedule.queues[s];
    if (cursor[s] >= queue.size()) return std::nullopt;
    return queue[cursor[s]++];
  };
  d.run(p);
  return std::move(d).finish(Strategy::oracle, g);
}

SimResult simulate_dynamic(const Trace& trace, const SimConfig& cfg) {
  Decoder d(trace.prompt_len, cfg.retain_prefix_kv);
  const auto target = trace.group_size();
  const auto lengths = trace.true_lengths();
  std::optional<LengthSampler> sampler;
  if (cfg.dynamic_stream) {
    sampler.emplace(cfg.dynamic_stream->dist, cfg.dynamic_stream->max_len, cfg.dynamic_stream_seed);
  }
  std::size_t drawn = 0;
  std::size_t completed = 0;
  auto next_candidate = [&]() -> int {
    const auto len = sampler ? sampler->next() : lengths[drawn % lengths.size()];
    ++drawn;
    return d.add_sample(len);
  };

  Phase p;
  p.n_slots = cfg.micro_size;
  p.work = [&](int id) { return d.true_len(id); };
  p.refill = [&](int) -> std::optional<int> { return next_candidate(); };
  p.accept = [&](int) {
    if (completed >= target) return false;
    ++completed;
    return true;
  };
  p.stop = [&] { return completed >= target; };
  for (int id : d.run(p)) d.discard(id);
  return std::move(d).finish(Strategy::dynamic, cfg.micro_size);
}

SimResult simulate_infinite(const Trace& trace, const SimConfig& cfg) {
  auto d = make_decoder(trace, cfg.retain_prefix_kv);
  const auto G = trace.group_size();
  const int g = cfg.micro_size;
  const int n_groups = static_cast<int>(G) / g;
  const auto k = cfg.predictor.prefix_k;

  // Phase 0: barriered prefix rounds in trace order.
  if (k > 0) {
    run_rounds(d, iota_ids(G), g, [&](int id) { return std::min(d.true_len(id), k); });
  }
  const auto prefix_steps = d.step();

  PredictorConfig pcfg = cfg.predictor;
  pcfg.seed = mix_seed(cfg.seed, cfg.predictor.seed);
  const auto predicted = predict_lengths(trace, pcfg);

  // Samples still running after the prefix, in trace order; the planner
  // and SJF see them by local index with remaining predicted work.
  std::vector<int> pending;
  std::vector<std::int64_t> remaining_pred;
  for (const auto& s : predicted.samples) {
    if (s.true_len > k) {
      pending.push_back(s.id);
      remaining_pred.push_back(std::max<std::int64_t>(1, *s.pred_len - k));
    }
  }

  if (!pending.empty()) {
    const auto local_count = pending.size();
    SlotQueueState state(local_count, g);
    std::vector<int> local_of(G, -1);
    for (std::size_t j = 0; j < local_count; ++j) local_of[static_cast<std::size_t>(pending[j])] = static_cast<int>(j);
    auto global = [&](std::optional<int> local) -> std::optional<int> {
      if (!local) return std::nullopt;
      return pending[static_cast<std::size_t>(*local)];
    };

    std::vector<std::optional<int>> initial(static_cast<std::size_t>(g));
    std::vector<std::vector<int>> bins;
    std::vector<int> plan_order;
    if (cfg.use_plan) {
      const int n_bins = cfg.bin_mode == BinMode::groups ? n_groups : g;
      const auto plan = fptas_plan(remaining_pred, n_bins, cfg.epsilon);
      bins = plan.members();
      plan_order = plan.execution_order();
      if (cfg.bin_mode == BinMode::groups) {
        for (std::size_t s = 0; s < initial.size() && s < plan_order.size(); ++s) initial[s] = plan_order[s];
      } else {
        for (std::size_t s = 0; s < initial.size(); ++s) {
          if (!bins[s].empty()) initial[s] = bins[s].front();
        }
      }
    } else {
      for (std::size_t s = 0; s < initial.size() && s < local_count; ++s) initial[s] = static_cast<int>(s);
    }
    for (std::size_t s = 0; s < initial.size(); ++s) {
      if (initial[s]) state.mark_started(*initial[s], static_cast<int>(s));
    }

    auto is_started = [&](int local) { return state.is_started(local); };
    OrderedCursor plan_cursor(cfg.use_plan ? plan_order : iota_ids(local_count));
    std::vector<OrderedCursor> bin_cursors;
    for (const auto& bin : bins) bin_cursors.emplace_back(bin);

    Phase p;
    p.n_slots = g;
    p.work = [&](int id) { return d.true_len(id) - d.decoded(id); };
    p.accept = [&](int id) {
      state.mark_finished(local_of[static_cast<std::size_t>(id)]);
      return true;
    };
    std::vector<std::optional<int>> global_initial(initial.size());
    for (std::size_t s = 0; s < initial.size(); ++s) global_initial[s] = global(initial[s]);
    p.initial = std::move(global_initial);

    if (cfg.use_sjf) {
      p.refill = [&](int slot) { return global(sjf_refill(state, slot, remaining_pred)); };
    } else if (cfg.use_plan && cfg.bin_mode == BinMode::slots) {
      // Static per-slot bins, each drained in plan order.
      p.refill = [&](int slot) -> std::optional<int> {
        auto local = bin_cursors[static_cast<std::size_t>(slot)].next(is_started);
        if (local) state.mark_started(*local, slot);
        return global(local);
      };
    } else {
      p.quota = n_groups;
      p.refill = [&](int slot) -> std::optional<int> {
        auto local = plan_cursor.next(is_started);
        if (local) state.mark_started(*local, slot);
        return global(local);
      };
    }
    d.run(p);
  }

  auto result = std::move(d).finish(Strategy::infinite, g);
  result.prefix_k = k;
  result.prefix_steps = prefix_steps;
  if (!cfg.count_prefix_steps) result.total_steps -= prefix_steps;
  return result;
}

void validate_config(const Trace& trace, const SimConfig& cfg) {
  trace.validate();
  const auto G = trace.group_size();
  if (cfg.group_size != 0 && static_cast<std::size_t>(cfg.group_size) != G) {
    throw ConfigError("group_size " + std::to_string(cfg.group_size) + " does not match trace size " +
                      std::to_string(G));
  }
  if (cfg.micro_size < 1) throw ConfigError("micro_size must be >= 1");
  const bool needs_rounds = cfg.strategy == Strategy::naive || cfg.strategy == Strategy::fixed ||
                            cfg.strategy == Strategy::infinite;
  if (needs_rounds && G % static_cast<std::size_t>(cfg.micro_size) != 0) {
    throw ConfigError("group size G=" + std::to_string(G) + " is not divisible by micro size g=" +
                      std::to_string(cfg.micro_size));
  }
  if (cfg.strategy == Strategy::infinite) {
    if (!(cfg.epsilon > 0)) throw ConfigError("epsilon must be > 0");
    cfg.predictor.validate();
  }
  if (cfg.strategy == Strategy::dynamic && cfg.dynamic_stream) {
    validate(cfg.dynamic_stream->dist);
    if (cfg.dynamic_stream->max_len < 1) throw ConfigError("dynamic stream max_len must be >= 1");
  }
}

}  // namespace

SimResult simulate(const Trace& trace, const SimConfig& cfg) {
  validate_config(trace, cfg);
  switch (cfg.strategy) {
    case Strategy::full: return simulate_full(trace, cfg);
    case Strategy::naive: return simulate_naive(trace, cfg);
    case Strategy::fixed: return simulate_fixed(trace, cfg);
    case Strategy::dynamic: return simulate_dynamic(trace, cfg);
    case Strategy::infinite: return simulate_infinite(trace, cfg);
    case Strategy::oracle: return simulate_oracle(trace, cfg);
  }
  throw ConfigError("unhandled strategy");
}

std::int64_t step_lower_bound(const Trace& trace, int n_slots, const LowerBoundOptions& opts) {
  if (n_slots < 1) throw ConfigError("slot count must be >= 1");
  const auto g = static_cast<std::int64_t>(n_slots);
  const auto k = std::max<std::int64_t>(opts.prefix_k, 0);
  std::int64_t prefix_steps = 0;
  std::int64_t round_max = 0;
  std::int64_t remaining_total = 0;
  std::int64_t remaining_max = 0;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto len = trace.samples[i].true_len;
    round_max = std::max(round_max, std::min(len, k));
    if ((i + 1) % static_cast<std::size_t>(g) == 0 || i + 1 == trace.samples.size()) {
      prefix_steps += round_max;
      round_max = 0;
    }
    const auto rest = std::max<std::int64_t>(len - k, 0);
    remaining_total += rest;
    remaining_max = std::max(remaining_max, rest);
  }
  const auto bound = std::max(remaining_max, (remaining_total + g - 1) / g);
  return bound + (opts.count_prefix_steps ? prefix_steps : 0);
}

std::int64_t step_lower_bound(const Trace& trace, const SimConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::full:
      return step_lower_bound(trace, static_cast<int>(trace.group_size()));
    case Strategy::infinite:
      return step_lower_bound(trace, cfg.micro_size,
                              LowerBoundOptions{cfg.predictor.prefix_k, cfg.count_prefix_steps});
    default:
      return step_lower_bound(trace, cfg.micro_size);
  }
}

}  // namespace infsamp
