#include <json.hpp>

#include "infsamp/engine.hpp"

namespace infsamp {

std::string sim_result_to_json(const SimResult& result, bool include_log) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(result.strategy);
  j["total_steps"] = result.total_steps;
  j["avg_emitted_len"] = result.avg_emitted_len;
  j["peak_kv_tokens"] = result.peak_kv_tokens;
  j["prompt_len"] = result.prompt_len;
  j["slot_count"] = result.slot_count;
  j["prefix_k"] = result.prefix_k;
  j["prefix_steps"] = result.prefix_steps;

  auto per_sample = nlohmann::ordered_json::array();
  for (const auto& s : result.per_sample) {
    per_sample.push_back({{"id", s.id},
                          {"start_step", s.start_step},
                          {"finish_step", s.finish_step},
                          {"emitted_len", s.emitted_len}});
  }
  j["per_sample"] = std::move(per_sample);
  j["discarded_ids"] = result.discarded_ids;

  if (include_log) {
    auto log = nlohmann::ordered_json::array();
    for (const auto& e : result.schedule_log) {
      log.push_back({{"step", e.step}, {"slot", e.slot}, {"event", to_string(e.kind)}, {"sample", e.sample}});
    }
    j["schedule_log"] = std::move(log);
  }
  return j.dump(2) + "\n";
}

}  // namespace infsamp
