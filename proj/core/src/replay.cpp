#include <algorithm>
#include <string>

#include "infsamp/engine.hpp"
#include "infsamp/error.hpp"

namespace infsamp {

std::int64_t Occupancy::peak_tokens() const {
  if (kv_tokens.empty()) return 0;
  return *std::max_element(kv_tokens.begin(), kv_tokens.end());
}

namespace {

struct ReplaySample {
  std::int64_t decoded = 0;
  std::int64_t first_token = 0;
  std::int64_t last_token = 0;
  std::int64_t finish = 0;
  bool started_this_step = false;
  bool paused = false;
};

[[noreturn]] void corrupt(const ScheduleEvent& e, const std::string& what) {
  throw IntegrityError("schedule log step " + std::to_string(e.step) + " slot " + std::to_string(e.slot) +
                       ": " + what);
}

}  // namespace

Occupancy replay_schedule(const SimResult& result) {
  Occupancy occ;
  const auto& log = result.schedule_log;

  int max_id = -1;
  for (const auto& e : log) max_id = std::max(max_id, e.sample);
  std::vector<ReplaySample> samples(static_cast<std::size_t>(max_id + 1));
  auto sample_of = [&](const ScheduleEvent& e) -> ReplaySample& {
    if (e.sample < 0) corrupt(e, "event without a sample");
    return samples[static_cast<std::size_t>(e.sample)];
  };

  std::int64_t held = 0;
  std::vector<int> active_prev;  // had a token on the previous step, not finished
  std::size_t i = 0;
  std::int64_t expected_step = 1;

  while (i < log.size()) {
    const auto step = log[i].step;
    if (step != expected_step) corrupt(log[i], "expected step " + std::to_string(expected_step));
    ++expected_step;

    std::vector<int> slot_used(static_cast<std::size_t>(std::max(result.slot_count, 0)), -1);
    std::vector<int> tokens_now;
    std::vector<int> finished_now;

    for (; i < log.size() && log[i].step == step; ++i) {
      const auto& e = log[i];
      if (e.slot < 0 || e.slot >= result.slot_count) corrupt(e, "slot out of range");
      switch (e.kind) {
        case EventKind::idle:
          if (e.sample != -1) corrupt(e, "idle event names a sample");
          break;
        case EventKind::refill:
          sample_of(e);
          break;
        case EventKind::start: {
          auto& s = sample_of(e);
          if (s.finish != 0) corrupt(e, "start of finished sample " + std::to_string(e.sample));
          s.started_this_step = true;
          break;
        }
        case EventKind::token: {
          auto& s = sample_of(e);
          auto& used = slot_used[static_cast<std::size_t>(e.slot)];
          if (used >= 0) corrupt(e, "two tokens in one slot");
          used = e.sample;
          if (s.finish != 0) corrupt(e, "token after finish of sample " + std::to_string(e.sample));
          if (s.last_token == step) corrupt(e, "two tokens for sample " + std::to_string(e.sample));
          const bool resuming = s.decoded > 0 && s.last_token != step - 1;
          if ((s.decoded == 0 || resuming) && !s.started_this_step) {
            corrupt(e, "token without start for sample " + std::to_string(e.sample));
          }
          if (resuming && s.paused && !result.retain_prefix_kv) held += s.decoded;
          s.paused = false;
          s.started_this_step = false;
          if (s.decoded == 0) s.first_token = step;
          ++s.decoded;
          s.last_token = step;
          ++held;
          tokens_now.push_back(e.sample);
          break;
        }
        case EventKind::finish: {
          auto& s = sample_of(e);
          if (s.finish != 0) corrupt(e, "sample " + std::to_string(e.sample) + " finished twice");
          if (s.last_token != step || slot_used[static_cast<std::size_t>(e.slot)] != e.sample) {
            corrupt(e, "finish without a token in the same slot");
          }
          s.finish = step;
          finished_now.push_back(e.sample);
          break;
        }
      }
    }

    // Samples that ran last step but neither finished nor ran now paused.
    for (int id : active_prev) {
      auto& s = samples[static_cast<std::size_t>(id)];
      if (s.last_token != step && s.finish == 0 && !s.paused) {
        s.paused = true;
        if (!result.retain_prefix_kv) held -= s.decoded;
      }
    }

    occ.active_slots.push_back(static_cast<int>(tokens_now.size()));
    occ.kv_tokens.push_back(held);
    occ.tokens_decoded += static_cast<std::int64_t>(tokens_now.size());

    for (int id : finished_now) held -= samples[static_cast<std::size_t>(id)].decoded;
    active_prev.clear();
    for (int id : tokens_now) {
      if (samples[static_cast<std::size_t>(id)].finish == 0) active_prev.push_back(id);
    }
  }

  for (const auto& out : result.per_sample) {
    if (out.id < 0 || static_cast<std::size_t>(out.id) >= samples.size()) {
      throw IntegrityError("per-sample outcome " + std::to_string(out.id) + " absent from the log");
    }
    const auto& s = samples[static_cast<std::size_t>(out.id)];
    if (s.decoded != out.emitted_len || s.finish != out.finish_step || s.first_token != out.start_step) {
      throw IntegrityError("per-sample outcome " + std::to_string(out.id) + " disagrees with the log");
    }
  }
  const auto last_step = static_cast<std::int64_t>(occ.kv_tokens.size());
  if (result.total_steps > last_step || result.total_steps < last_step - result.prefix_steps) {
    throw IntegrityError("total_steps " + std::to_string(result.total_steps) + " disagrees with log length " +
                         std::to_string(last_step));
  }
  return occ;
}

}  // namespace infsamp
