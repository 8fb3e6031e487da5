#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace infsamp {

struct TokenRecord {
  double logp_new = 0.0;
  double logp_old = 0.0;
  double logp_ref = 0.0;
};

struct SampleScore {
  int id = 0;
  double rm_score = 0.0;
  std::vector<TokenRecord> tokens;
};

enum class AdvantageMode { std_norm, mean_only };
enum class KlMode { k3, logdiff };

std::string_view to_string(AdvantageMode mode);
std::string_view to_string(KlMode mode);
AdvantageMode parse_advantage_mode(std::string_view text);
KlMode parse_kl_mode(std::string_view text);

struct GrpoConfig {
  double clip_eps = 0.2;
  double beta = 0.0;
  AdvantageMode advantage_mode = AdvantageMode::std_norm;
  KlMode kl_mode = KlMode::k3;

  void validate() const;
};

/// r_i = rm_i - beta * sum_t (logp_new - logp_ref).
std::vector<double> compute_rewards(std::span<const SampleScore> samples, double beta);

/// Population statistics. A zero-variance group gets all-zero std_norm advantages.
std::vector<double> compute_advantages(std::span<const double> rewards, AdvantageMode mode);

double kl_term(const TokenRecord& token, KlMode mode);

/// Clipped surrogate minus beta*KL, averaged over tokens, then over samples.
double micro_objective(std::span<const SampleScore> group, std::span<const double> advantages,
                       const GrpoConfig& cfg);

double aggregate_micro(std::span<const double> micro_values);

struct MicroBatchResult {
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<double> micro_values;
  double total = 0.0;
};

/// Rewards and advantages over the whole group, objective per consecutive
/// micro group of size g, then the mean. g must divide the group size.
MicroBatchResult micro_batched_objective(std::span<const SampleScore> samples, int micro_size,
                                         const GrpoConfig& cfg);

/// Per-token CSV `sample_id,logp_new,logp_old,logp_ref` joined with per-sample
/// CSV `sample_id,rm_score`. Samples come back sorted by id.
std::vector<SampleScore> read_scores(std::istream& tokens, std::istream& rewards);
std::vector<SampleScore> load_scores(const std::filesystem::path& tokens, const std::filesystem::path& rewards);
void write_scores(std::span<const SampleScore> samples, std::ostream& tokens, std::ostream& rewards);

}  // namespace infsamp
