#include <algorithm>
#include <string>

#include "infsamp/engine.hpp"
#include "infsamp/error.hpp"

namespace infsamp {

std::string_view to_string(SchedulerVariant variant) {
  switch (variant) {
    case SchedulerVariant::fifo: return "fifo";
    case SchedulerVariant::fptas_only: return "fptas-only";
    case SchedulerVariant::sjf_only: return "sjf-only";
    case SchedulerVariant::infinite: return "infinite";
  }
  return "unknown";
}

SchedulerVariant parse_scheduler_variant(std::string_view text) {
  for (auto v : {SchedulerVariant::fifo, SchedulerVariant::fptas_only, SchedulerVariant::sjf_only,
                 SchedulerVariant::infinite}) {
    if (text == to_string(v)) return v;
  }
  throw ConfigError("unknown scheduler '" + std::string(text) +
                    "' (expected fifo, fptas-only, sjf-only or infinite)");
}

SimConfig scheduler_config(SimConfig base, SchedulerVariant variant) {
  switch (variant) {
    case SchedulerVariant::fifo:
      base.strategy = Strategy::fixed;
      break;
    case SchedulerVariant::fptas_only:
      base.strategy = Strategy::infinite;
      base.use_plan = true;
      base.use_sjf = false;
      break;
    case SchedulerVariant::sjf_only:
      base.strategy = Strategy::infinite;
      base.use_plan = false;
      base.use_sjf = true;
      break;
    case SchedulerVariant::infinite:
      base.strategy = Strategy::infinite;
      base.use_plan = true;
      base.use_sjf = true;
      break;
  }
  return base;
}

namespace {

ComparisonRow row_from(std::string label, const SimResult& r) {
  ComparisonRow row;
  row.label = std::move(label);
  row.total_steps = r.total_steps;
  row.avg_len = r.avg_emitted_len;
  row.peak_kv_tokens = r.peak_kv_tokens;
  return row;
}

void apply_ratios(std::vector<ComparisonRow>& rows, std::string_view baseline_label) {
  if (rows.empty()) return;
  auto base = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.label == baseline_label; });
  if (base == rows.end()) base = rows.begin();
  const auto base_steps = static_cast<double>(base->total_steps);
  const auto base_len = base->avg_len;
  for (auto& r : rows) {
    r.step_ratio = base_steps > 0 ? static_cast<double>(r.total_steps) / base_steps : 0.0;
    r.len_ratio = base_len > 0 ? r.avg_len / base_len : 0.0;
  }
}

}  // namespace

std::vector<ComparisonRow> run_comparison(const Trace& trace, const SimConfig& base,
                                          std::span<const Strategy> strategies) {
  if (strategies.empty()) throw ConfigError("no strategies to compare");
  std::vector<ComparisonRow> rows;
  for (auto s : strategies) {
    SimConfig cfg = base;
    cfg.strategy = s;
    rows.push_back(row_from(std::string(to_string(s)), simulate(trace, cfg)));
  }
  apply_ratios(rows, to_string(Strategy::naive));
  return rows;
}

std::vector<ComparisonRow> run_scheduler_comparison(const Trace& trace, const SimConfig& base,
                                                    std::span<const SchedulerVariant> variants) {
  if (variants.empty()) throw ConfigError("no schedulers to compare");
  std::vector<ComparisonRow> rows;
  for (auto v : variants) {
    rows.push_back(row_from(std::string(to_string(v)), simulate(trace, scheduler_config(base, v))));
  }
  apply_ratios(rows, to_string(SchedulerVariant::fifo));
  return rows;
}

}  // namespace infsamp
