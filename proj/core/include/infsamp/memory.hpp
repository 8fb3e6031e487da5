#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "infsamp/engine.hpp"
#include "infsamp/trace.hpp"

namespace infsamp {

/// Decoder geometry for KV-cache sizing. Activation and workspace memory
/// are not modelled; `weight_bytes` is a flat overhead.
struct KvModel {
  std::int64_t layers = 1;
  std::int64_t kv_heads = 1;
  std::int64_t head_dim = 1;
  std::int64_t bytes_per_element = 1;
  std::int64_t weight_bytes = 0;
  std::int64_t prompt_len = 0;

  void validate() const;
};

/// 2 (K and V) * layers * kv_heads * head_dim * bytes_per_element.
std::int64_t kv_bytes_per_token(const KvModel& model);

/// weight_bytes + kv_bytes_per_token * peak_kv_tokens. The prompt's prefill
/// is already counted once inside peak_kv_tokens.
std::int64_t peak_bytes(const SimResult& result, const KvModel& model);

/// Reads `key=value` lines (`#` comments allowed). layers, kv_heads,
/// head_dim and bytes_per_element are required.
KvModel read_kv_model(std::istream& in);
KvModel load_kv_model(const std::filesystem::path& path);

/// Trace source for scaling reports: each G draws a fresh trace of size G.
struct TraceGenerator {
  LengthDistribution dist;
  std::int64_t max_len = 1024;
  std::uint64_t seed = 0;
};

struct ScalingRow {
  int group_size = 0;
  int micro_size = 0;
  Strategy strategy = Strategy::full;
  std::int64_t peak_kv_tokens = 0;
  std::int64_t peak_bytes = 0;
};

/// For each G: one `full` row (reported with g = G) followed by one `naive`
/// row per micro size. Every G must be divisible by every g.
std::vector<ScalingRow> scaling_report(const TraceGenerator& gen, const KvModel& model,
                                       std::span<const int> group_sizes, std::span<const int> micro_sizes);

/// Same report over a caller-supplied trace per group size.
std::vector<ScalingRow> scaling_report(std::span<const Trace> traces, const KvModel& model,
                                       std::span<const int> micro_sizes);

/// CSV `G,g,strategy,peak_bytes`.
void write_scaling_csv(std::span<const ScalingRow> rows, std::ostream& out);

}  // namespace infsamp
