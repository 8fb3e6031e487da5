#include "infsamp/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "infsamp/error.hpp"

namespace infsamp {

namespace {

constexpr std::string_view kHeader = "id,true_len,pred_len";

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(ids[i]);
  }
  return out;
}

template <class T>
bool parse_number(std::string_view text, T& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is incomplete on older libstdc++; strtod with a
    // full-match check behaves the same for this input class.
    std::string buf(text);
    char* end = nullptr;
    value = std::strtod(buf.c_str(), &end);
    return end == buf.c_str() + buf.size();
  } else {
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
  }
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double draw(const LengthDistribution& dist, Rng& rng) {
  return std::visit(
      [&rng](const auto& d) -> double {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Lognormal>) {
          return std::exp(d.mu + d.sigma * rng.normal());
        } else if constexpr (std::is_same_v<D, Uniform>) {
          return d.lo + (d.hi - d.lo) * rng.uniform();
        } else {
          return rng.uniform() < d.p_short ? d.short_len : d.long_len;
        }
      },
      dist);
}

std::int64_t clamp_length(double value, std::int64_t max_len) {
  if (!(value >= 1.0)) return 1;  // also catches NaN
  if (!(value <= static_cast<double>(max_len))) return max_len;
  return std::clamp<std::int64_t>(std::llround(value), 1, max_len);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::int64_t> Trace::true_lengths() const {
  std::vector<std::int64_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.true_len);
  return out;
}

std::vector<std::int64_t> Trace::pred_lengths() const {
  std::vector<std::int64_t> out;
  std::vector<int> missing;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.pred_len) missing.push_back(s.id);
    out.push_back(s.pred_len.value_or(0));
  }
  if (!missing.empty()) throw DataError("missing pred_len for ids " + join_ids(missing));
  return out;
}

std::int64_t Trace::total_tokens() const {
  std::int64_t total = 0;
  for (const auto& s : samples) total += s.true_len;
  return total;
}

std::int64_t Trace::max_length() const {
  std::int64_t m = 0;
  for (const auto& s : samples) m = std::max(m, s.true_len);
  return m;
}

double Trace::mean_length() const {
  if (samples.empty()) return 0.0;
  return static_cast<double>(total_tokens()) / static_cast<double>(samples.size());
}

void Trace::validate() const {
  if (samples.empty()) throw DataError("trace has no samples");
  if (prompt_len < 0) throw DataError("prompt_len must be >= 0");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.id != static_cast<int>(i)) {
      throw DataError("sample ids must be contiguous from 0; position " + std::to_string(i) +
                      " holds id " + std::to_string(s.id));
    }
    if (s.true_len < 1) throw DataError("sample " + std::to_string(s.id) + ": true_len must be >= 1");
    if (s.pred_len && *s.pred_len < 1) {
      throw DataError("sample " + std::to_string(s.id) + ": pred_len must be >= 1");
    }
  }
}

Trace make_trace(std::span<const std::int64_t> lengths, std::int64_t prompt_len) {
  Trace t;
  t.prompt_len = prompt_len;
  t.samples.reserve(lengths.size());
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    t.samples.push_back(SequenceSpec{static_cast<int>(i), lengths[i], std::nullopt});
  }
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------

LengthDistribution parse_distribution(std::string_view text) {
  const auto parts = split(text, ':');
  const auto name = parts.front();
  auto number = [&](std::size_t idx, std::string_view field) {
    double v = 0;
    if (idx >= parts.size() || !parse_number(parts[idx], v)) {
      throw ConfigError("distribution '" + std::string(text) + "': bad or missing field " +
                        std::string(field));
    }
    return v;
  };
  auto expect_arity = [&](std::size_t n) {
    if (parts.size() != n + 1) {
      throw ConfigError("distribution '" + std::string(text) + "' expects " + std::to_string(n) +
                        " parameters");
    }
  };

  LengthDistribution dist;
  if (name == "lognormal") {
    expect_arity(2);
    dist = Lognormal{number(1, "mu"), number(2, "sigma")};
  } else if (name == "uniform") {
    expect_arity(2);
    dist = Uniform{number(1, "lo"), number(2, "hi")};
  } else if (name == "bimodal") {
    expect_arity(3);
    dist = Bimodal{number(1, "l1"), number(2, "l2"), number(3, "p")};
  } else {
    throw ConfigError("unknown distribution '" + std::string(name) +
                      "' (expected lognormal, uniform or bimodal)");
  }
  validate(dist);
  return dist;
}

std::string to_string(const LengthDistribution& dist) {
  return std::visit(
      [](const auto& d) -> std::string {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Lognormal>) {
          return "lognormal:" + format_real(d.mu) + ":" + format_real(d.sigma);
        } else if constexpr (std::is_same_v<D, Uniform>) {
          return "uniform:" + format_real(d.lo) + ":" + format_real(d.hi);
        } else {
          return "bimodal:" + format_real(d.short_len) + ":" + format_real(d.long_len) + ":" +
                 format_real(d.p_short);
        }
      },
      dist);
}

void validate(const LengthDistribution& dist) {
  auto finite = [](double v, const char* field) {
    if (!std::isfinite(v)) throw ConfigError(std::string(field) + " must be finite");
  };
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Lognormal>) {
          finite(d.mu, "lognormal.mu");
          finite(d.sigma, "lognormal.sigma");
          if (d.sigma < 0) throw ConfigError("lognormal.sigma must be >= 0");
        } else if constexpr (std::is_same_v<D, Uniform>) {
          finite(d.lo, "uniform.lo");
          finite(d.hi, "uniform.hi");
          if (d.lo > d.hi) throw ConfigError("uniform.lo must be <= uniform.hi");
        } else {
          finite(d.short_len, "bimodal.l1");
          finite(d.long_len, "bimodal.l2");
          finite(d.p_short, "bimodal.p");
          if (d.p_short < 0 || d.p_short > 1) throw ConfigError("bimodal.p must be in [0, 1]");
        }
      },
      dist);
}

LengthSampler::LengthSampler(LengthDistribution dist, std::int64_t max_len, std::uint64_t seed)
    : dist_(std::move(dist)), max_len_(max_len), rng_(seed) {
  validate(dist_);
  if (max_len_ < 1) throw ConfigError("max_len must be >= 1");
}

std::int64_t LengthSampler::next() { return clamp_length(draw(dist_, rng_), max_len_); }

Trace generate_trace(const LengthDistribution& dist, int count, std::int64_t max_len,
                     std::int64_t prompt_len, std::uint64_t seed) {
  if (count < 1) throw ConfigError("count must be >= 1");
  if (prompt_len < 0) throw ConfigError("prompt_len must be >= 0");
  LengthSampler sampler(dist, max_len, seed);
  Trace t;
  t.prompt_len = prompt_len;
  t.seed = seed;
  t.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) t.samples.push_back(SequenceSpec{i, sampler.next(), std::nullopt});
  return t;
}

// ---------------------------------------------------------------------------

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::oracle: return "oracle";
    case PredictorKind::noisy: return "noisy";
    case PredictorKind::constant: return "constant";
    case PredictorKind::file: return "file";
  }
  return "unknown";
}

PredictorKind parse_predictor_kind(std::string_view text) {
  if (text == "oracle") return PredictorKind::oracle;
  if (text == "noisy") return PredictorKind::noisy;
  if (text == "constant") return PredictorKind::constant;
  if (text == "file") return PredictorKind::file;
  throw ConfigError("unknown predictor '" + std::string(text) +
                    "' (expected oracle, noisy, constant or file)");
}

void PredictorConfig::validate() const {
  if (prefix_k < 0) throw ConfigError("predictor.prefix_k must be >= 0");
  if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("predictor.noise_sigma must be finite and >= 0");
  }
  if (constant_value < 1) throw ConfigError("predictor.constant_value must be >= 1");
}

Trace predict_lengths(Trace trace, const PredictorConfig& cfg) {
  cfg.validate();
  std::vector<int> missing;
  for (auto& s : trace.samples) {
    if (s.true_len <= cfg.prefix_k) {
      s.pred_len = s.true_len;
      continue;
    }
    switch (cfg.kind) {
      case PredictorKind::oracle:
        s.pred_len = s.true_len;
        break;
      case PredictorKind::noisy: {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(s.id)));
        const double rel_error = rng.normal(0.0, cfg.noise_sigma);
        const double value = static_cast<double>(s.true_len) * (1.0 + rel_error);
        s.pred_len = value < 1.0 ? 1 : std::llround(value);
        break;
      }
      case PredictorKind::constant:
        s.pred_len = cfg.constant_value;
        break;
      case PredictorKind::file:
        if (!s.pred_len) missing.push_back(s.id);
        break;
    }
  }
  if (!missing.empty()) {
    throw DataError("predictor=file but pred_len missing for ids " + join_ids(missing));
  }
  return trace;
}

// ---------------------------------------------------------------------------

void write_trace(const Trace& trace, std::ostream& out) {
  out << "# prompt_len=" << trace.prompt_len << " seed=" << trace.seed << '\n';
  out << kHeader << '\n';
  for (const auto& s : trace.samples) {
    out << s.id << ',' << s.true_len << ',';
    if (s.pred_len) out << *s.pred_len;
    out << '\n';
  }
}

Trace read_trace(std::istream& in) {
  Trace t;
  bool header_seen = false;
  std::vector<SequenceSpec> rows;
  std::vector<std::size_t> row_lines;
  std::string line;
  std::size_t lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view(line);
    if (view.empty()) continue;

    if (view.front() == '#') {
      if (header_seen) throw ParseError(lineno, "metadata comment after header");
      std::istringstream fields{std::string(view.substr(1))};
      std::string token;
      while (fields >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected key=value, got '" + token + "'");
        const std::string_view key = std::string_view(token).substr(0, eq);
        const std::string_view value = std::string_view(token).substr(eq + 1);
        bool ok = false;
        if (key == "prompt_len") {
          ok = parse_number(value, t.prompt_len) && t.prompt_len >= 0;
        } else if (key == "seed") {
          ok = parse_number(value, t.seed);
        } else {
          throw ParseError(lineno, "unknown metadata key '" + std::string(key) + "'");
        }
        if (!ok) throw ParseError(lineno, "bad value for " + std::string(key));
      }
      continue;
    }

    if (!header_seen) {
      if (view != kHeader) {
        throw ParseError(lineno, "expected header '" + std::string(kHeader) + "'");
      }
      header_seen = true;
      continue;
    }

    const auto fields = split(view, ',');
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError(lineno, "expected 2 or 3 comma-separated fields");
    }
    SequenceSpec s;
    if (!parse_number(fields[0], s.id) || s.id < 0) throw ParseError(lineno, "bad id");
    if (!parse_number(fields[1], s.true_len)) throw ParseError(lineno, "bad true_len");
    if (s.true_len < 1) {
      throw DataError("line " + std::to_string(lineno) + ": true_len must be >= 1");
    }
    if (fields.size() == 3 && !fields[2].empty()) {
      std::int64_t pred = 0;
      if (!parse_number(fields[2], pred)) throw ParseError(lineno, "bad pred_len");
      if (pred < 1) throw DataError("line " + std::to_string(lineno) + ": pred_len must be >= 1");
      s.pred_len = pred;
    }
    rows.push_back(s);
    row_lines.push_back(lineno);
  }

  if (!header_seen) throw ParseError(lineno + 1, "missing header '" + std::string(kHeader) + "'");
  if (rows.empty()) throw DataError("trace has no samples");

  std::vector<int> slot_of(rows.size(), -1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto id = static_cast<std::size_t>(rows[r].id);
    if (id >= rows.size()) {
      throw DataError("line " + std::to_string(row_lines[r]) + ": id " + std::to_string(rows[r].id) +
                      " outside [0, " + std::to_string(rows.size()) + ")");
    }
    if (slot_of[id] >= 0) {
      throw DataError("line " + std::to_string(row_lines[r]) + ": duplicate id " +
                      std::to_string(rows[r].id));
    }
    slot_of[id] = static_cast<int>(r);
  }
  t.samples.reserve(rows.size());
  for (std::size_t id = 0; id < rows.size(); ++id) t.samples.push_back(rows[static_cast<std::size_t>(slot_of[id])]);
  t.validate();
  return t;
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_trace(trace, out);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace '" + path.string() + "'");
  return read_trace(in);
}

}  // namespace infsamp
