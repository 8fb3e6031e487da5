#include "infsamp/memory.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>

#include "infsamp/error.hpp"

namespace infsamp {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw CapacityError("byte count overflows 64-bit range");
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

void KvModel::validate() const {
  auto at_least = [](std::int64_t v, std::int64_t lo, const char* key) {
    if (v < lo) throw ConfigError(std::string(key) + " must be >= " + std::to_string(lo));
  };
  at_least(layers, 1, "layers");
  at_least(kv_heads, 1, "kv_heads");
  at_least(head_dim, 1, "head_dim");
  at_least(bytes_per_element, 1, "bytes_per_element");
  at_least(weight_bytes, 0, "weight_bytes");
  at_least(prompt_len, 0, "prompt_len");
}

std::int64_t kv_bytes_per_token(const KvModel& model) {
  model.validate();
  auto bytes = checked_mul(2, model.layers);
  bytes = checked_mul(bytes, model.kv_heads);
  bytes = checked_mul(bytes, model.head_dim);
  return checked_mul(bytes, model.bytes_per_element);
}

std::int64_t peak_bytes(const SimResult& result, const KvModel& model) {
  if (result.prompt_len != model.prompt_len) {
    throw ConfigError("prompt_len mismatch: simulation used " + std::to_string(result.prompt_len) +
                      ", model config has " + std::to_string(model.prompt_len));
  }
  const auto kv = checked_mul(kv_bytes_per_token(model), result.peak_kv_tokens);
  std::int64_t total = 0;
  if (__builtin_add_overflow(kv, model.weight_bytes, &total)) {
    throw CapacityError("byte count overflows 64-bit range");
  }
  return total;
}

KvModel read_kv_model(std::istream& in) {
  std::map<std::string, std::int64_t*> fields;
  KvModel model;
  fields["layers"] = &model.layers;
  fields["kv_heads"] = &model.kv_heads;
  fields["head_dim"] = &model.head_dim;
  fields["bytes_per_element"] = &model.bytes_per_element;
  fields["weight_bytes"] = &model.weight_bytes;
  fields["prompt_len"] = &model.prompt_len;

  std::map<std::string, bool> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key=value");
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown model config key '" + key + "'");
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("model config key '" + key + "' has non-integer value '" + value + "'");
    }
    *it->second = v;
    seen[key] = true;
  }
  for (const char* required : {"layers", "kv_heads", "head_dim", "bytes_per_element"}) {
    if (!seen[required]) throw ConfigError("model config is missing key '" + std::string(required) + "'");
  }
  model.validate();
  return model;
}

KvModel load_kv_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model config '" + path.string() + "'");
  return read_kv_model(in);
}

std::vector<ScalingRow> scaling_report(std::span<const Trace> traces, const KvModel& model,
                                       std::span<const int> micro_sizes) {
  model.validate();
  std::vector<ScalingRow> rows;
  for (const auto& trace : traces) {
    const int G = static_cast<int>(trace.group_size());
    for (int g : micro_sizes) {
      if (g < 1 || G % g != 0) {
        throw ConfigError("group size G=" + std::to_string(G) + " is not divisible by micro size g=" +
                          std::to_string(g));
      }
    }
    SimConfig cfg;
    cfg.strategy = Strategy::full;
    const auto full = simulate(trace, cfg);
    rows.push_back(ScalingRow{G, G, Strategy::full, full.peak_kv_tokens, peak_bytes(full, model)});
    for (int g : micro_sizes) {
      cfg.strategy = Strategy::naive;
      cfg.micro_size = g;
      const auto naive = simulate(trace, cfg);
      rows.push_back(ScalingRow{G, g, Strategy::naive, naive.peak_kv_tokens, peak_bytes(naive, model)});
    }
  }
  return rows;
}

std::vector<ScalingRow> scaling_report(const TraceGenerator& gen, const KvModel& model,
                                       std::span<const int> group_sizes, std::span<const int> micro_sizes) {
  std::vector<Trace> traces;
  for (int G : group_sizes) {
    if (G < 1) throw ConfigError("group sizes must be >= 1");
    traces.push_back(generate_trace(gen.dist, G, gen.max_len, model.prompt_len, gen.seed));
  }
  return scaling_report(traces, model, micro_sizes);
}

void write_scaling_csv(std::span<const ScalingRow> rows, std::ostream& out) {
  out << "G,g,strategy,peak_bytes\n";
  for (const auto& r : rows) {
    out << r.group_size << ',' << r.micro_size << ',' << to_string(r.strategy) << ',' << r.peak_bytes << '\n';
  }
}

}  // namespace infsamp
