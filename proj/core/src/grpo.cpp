#include "infsamp/grpo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "infsamp/error.hpp"

namespace infsamp {

std::string_view to_string(AdvantageMode mode) {
  return mode == AdvantageMode::std_norm ? "std_norm" : "mean_only";
}

std::string_view to_string(KlMode mode) { return mode == KlMode::k3 ? "k3" : "logdiff"; }

AdvantageMode parse_advantage_mode(std::string_view text) {
  if (text == "std_norm") return AdvantageMode::std_norm;
  if (text == "mean_only") return AdvantageMode::mean_only;
  throw ConfigError("unknown advantage mode '" + std::string(text) + "' (expected std_norm or mean_only)");
}

KlMode parse_kl_mode(std::string_view text) {
  if (text == "k3") return KlMode::k3;
  if (text == "logdiff") return KlMode::logdiff;
  throw ConfigError("unknown kl mode '" + std::string(text) + "' (expected k3 or logdiff)");
}

void GrpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must be in (0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
}

namespace {

void check_sample(const SampleScore& s) {
  if (s.tokens.empty()) throw DataError("sample " + std::to_string(s.id) + " has no tokens");
  if (!std::isfinite(s.rm_score)) throw DataError("sample " + std::to_string(s.id) + " has non-finite rm_score");
  for (const auto& t : s.tokens) {
    if (!std::isfinite(t.logp_new) || !std::isfinite(t.logp_old) || !std::isfinite(t.logp_ref)) {
      throw DataError("sample " + std::to_string(s.id) + " has a non-finite log-probability");
    }
  }
}

}  // namespace

std::vector<double> compute_rewards(std::span<const SampleScore> samples, double beta) {
  if (samples.empty()) throw DataError("no samples to score");
  std::vector<double> r;
  r.reserve(samples.size());
  for (const auto& s : samples) {
    check_sample(s);
    double log_ratio = 0.0;
    for (const auto& t : s.tokens) log_ratio += t.logp_new - t.logp_ref;
    r.push_back(s.rm_score - beta * log_ratio);
  }
  return r;
}

std::vector<double> compute_advantages(std::span<const double> rewards, AdvantageMode mode) {
  if (rewards.empty()) throw DataError("empty reward group");
  const auto n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double v : rewards) mean += v;
  mean /= n;

  std::vector<double> a(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) a[i] = rewards[i] - mean;
  if (mode == AdvantageMode::mean_only) return a;

  double var = 0.0;
  for (double d : a) var += d * d;
  const double sd = std::sqrt(var / n);
  if (sd == 0.0) return std::vector<double>(rewards.size(), 0.0);
  for (auto& d : a) d /= sd;
  return a;
}

double kl_term(const TokenRecord& token, KlMode mode) {
  const double d = token.logp_ref - token.logp_new;
  if (mode == KlMode::logdiff) return -d;
  return std::expm1(d) - d;
}

double micro_objective(std::span<const SampleScore> group, std::span<const double> advantages,
                       const GrpoConfig& cfg) {
  cfg.validate();
  if (group.empty()) throw DataError("empty micro group");
  if (advantages.size() != group.size()) {
    throw DataError("advantage count " + std::to_string(advantages.size()) + " does not match group size " +
                    std::to_string(group.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& s = group[i];
    check_sample(s);
    const double adv = advantages[i];
    double sum = 0.0;
    for (const auto& t : s.tokens) {
      const double ratio = std::exp(t.logp_new - t.logp_old);
      const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
      sum += std::min(ratio * adv, clipped * adv) - cfg.beta * kl_term(t, cfg.kl_mode);
    }
    total += sum / static_cast<double>(s.tokens.size());
  }
  return total / static_cast<double>(group.size());
}

double aggregate_micro(std::span<const double> micro_values) {
  if (micro_values.empty()) throw DataError("no micro-group values to aggregate");
  double sum = 0.0;
  for (double v : micro_values) sum += v;
  return sum / static_cast<double>(micro_values.size());
}

MicroBatchResult micro_batched_objective(std::span<const SampleScore> samples, int micro_size,
                                         const GrpoConfig& cfg) {
  cfg.validate();
  const auto G = samples.size();
  if (micro_size < 1 || G % static_cast<std::size_t>(micro_size) != 0) {
    throw ConfigError("micro size " + std::to_string(micro_size) + " does not divide group size " +
                      std::to_string(G));
  }
  MicroBatchResult out;
  out.rewards = compute_rewards(samples, cfg.beta);
  out.advantages = compute_advantages(out.rewards, cfg.advantage_mode);
  const auto g = static_cast<std::size_t>(micro_size);
  for (std::size_t begin = 0; begin < G; begin += g) {
    out.micro_values.push_back(
        micro_objective(samples.subspan(begin, g), std::span<const double>(out.advantages).subspan(begin, g), cfg));
  }
  out.total = aggregate_micro(out.micro_values);
  return out;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view text, std::size_t lineno, const char* name) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(lineno, std::string("bad ") + name + " '" + std::string(text) + "'");
  }
  return v;
}

// Calls fn(fields, lineno) for every data row after checking the header.
template <typename Fn>
void read_csv(std::istream& in, std::string_view header, std::size_t n_fields, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != header) throw ParseError(lineno, "expected header '" + std::string(header) + "'");
      header_seen = true;
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.size() != n_fields) {
      throw ParseError(lineno, "expected " + std::to_string(n_fields) + " comma-separated fields");
    }
    fn(fields, lineno);
  }
  if (!header_seen) throw ParseError(lineno + 1, "missing header '" + std::string(header) + "'");
}

constexpr std::string_view kTokenHeader = "sample_id,logp_new,logp_old,logp_ref";
constexpr std::string_view kRewardHeader = "sample_id,rm_score";

}  // namespace

std::vector<SampleScore> read_scores(std::istream& tokens, std::istream& rewards) {
  std::map<int, SampleScore> by_id;
  read_csv(rewards, kRewardHeader, 2, [&](const auto& f, std::size_t lineno) {
    const int id = parse_field<int>(f[0], lineno, "sample_id");
    SampleScore s;
    s.id = id;
    s.rm_score = parse_field<double>(f[1], lineno, "rm_score");
    if (!by_id.emplace(id, std::move(s)).second) throw DataError("duplicate reward for sample " + std::to_string(id));
  });
  read_csv(tokens, kTokenHeader, 4, [&](const auto& f, std::size_t lineno) {
    const int id = parse_field<int>(f[0], lineno, "sample_id");
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("tokens for sample " + std::to_string(id) + " have no reward row");
    it->second.tokens.push_back(TokenRecord{parse_field<double>(f[1], lineno, "logp_new"),
                                            parse_field<double>(f[2], lineno, "logp_old"),
                                            parse_field<double>(f[3], lineno, "logp_ref")});
  });
  std::vector<SampleScore> out;
  out.reserve(by_id.size());
  for (auto& [id, s] : by_id) {
    check_sample(s);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("score files contain no samples");
  return out;
}

std::vector<SampleScore> load_scores(const std::filesystem::path& tokens, const std::filesystem::path& rewards) {
  std::ifstream t(tokens);
  if (!t) throw IoError("cannot open token scores '" + tokens.string() + "'");
  std::ifstream r(rewards);
  if (!r) throw IoError("cannot open reward scores '" + rewards.string() + "'");
  return read_scores(t, r);
}

void write_scores(std::span<const SampleScore> samples, std::ostream& tokens, std::ostream& rewards) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  tokens << kTokenHeader << '\n';
  rewards << kRewardHeader << '\n';
  for (const auto& s : samples) {
    rewards << s.id << ',' << num(s.rm_score) << '\n';
    for (const auto& t : s.tokens) {
      tokens << s.id << ',' << num(t.logp_new) << ',' << num(t.logp_old) << ',' << num(t.logp_ref) << '\n';
    }
  }
}

}  // namespace infsamp
