#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "infsamp/random.hpp"

namespace infsamp {

/// One completion of a prompt's sample group, reduced to its length.
/// `true_len` counts response tokens only; `pred_len` is a predictor output.
struct SequenceSpec {
  int id = 0;
  std::int64_t true_len = 1;
  std::optional<std::int64_t> pred_len;

  friend bool operator==(const SequenceSpec&, const SequenceSpec&) = default;
};

/// The G samples drawn for a single prompt.
struct Trace {
  std::int64_t prompt_len = 0;
  std::vector<SequenceSpec> samples;
  std::uint64_t seed = 0;

  std::size_t group_size() const { return samples.size(); }
  std::vector<std::int64_t> true_lengths() const;
  /// Throws DataError when any sample lacks a prediction.
  std::vector<std::int64_t> pred_lengths() const;
  std::int64_t total_tokens() const;
  std::int64_t max_length() const;
  double mean_length() const;

  /// Checks G >= 1, ids contiguous from 0 in order, lengths >= 1.
  void validate() const;

  friend bool operator==(const Trace&, const Trace&) = default;
};

Trace make_trace(std::span<const std::int64_t> lengths, std::int64_t prompt_len = 0);

// ---------------------------------------------------------------------------
// Synthetic length distributions

struct Lognormal {
  double mu = 5.0;
  double sigma = 0.6;

  friend bool operator==(const Lognormal&, const Lognormal&) = default;
};

struct Uniform {
  double lo = 1.0;
  double hi = 1.0;

  friend bool operator==(const Uniform&, const Uniform&) = default;
};

/// Draws `short_len` with probability `p_short`, otherwise `long_len`.
struct Bimodal {
  double short_len = 1.0;
  double long_len = 1.0;
  double p_short = 0.5;

  friend bool operator==(const Bimodal&, const Bimodal&) = default;
};

using LengthDistribution = std::variant<Lognormal, Uniform, Bimodal>;

/// Parses `lognormal:MU:SIGMA`, `uniform:LO:HI` or `bimodal:L1:L2:P`.
LengthDistribution parse_distribution(std::string_view text);
std::string to_string(const LengthDistribution& dist);
void validate(const LengthDistribution& dist);

/// Unbounded deterministic stream of clamped integer lengths. The first
/// `count` values equal generate_trace(dist, count, max_len, _, seed).
class LengthSampler {
public:
  LengthSampler(LengthDistribution dist, std::int64_t max_len, std::uint64_t seed);

  std::int64_t next();

private:
  LengthDistribution dist_;
  std::int64_t max_len_;
  Rng rng_;
};

Trace generate_trace(const LengthDistribution& dist, int count, std::int64_t max_len,
                     std::int64_t prompt_len, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Length predictors

enum class PredictorKind { oracle, noisy, constant, file };

std::string_view to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(std::string_view text);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::oracle;
  std::int64_t prefix_k = 0;
  double noise_sigma = 0.0;
  std::int64_t constant_value = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fills pred_len for every sample. Samples with true_len <= prefix_k finish
/// during the prefix phase and always get pred_len = true_len.
Trace predict_lengths(Trace trace, const PredictorConfig& cfg);

// ---------------------------------------------------------------------------
// Trace file I/O
//
//   # prompt_len=<int> seed=<int>
//   id,true_len,pred_len
//   0,5,
//   1,3,4

void write_trace(const Trace& trace, std::ostream& out);
Trace read_trace(std::istream& in);
void save_trace(const Trace& trace, const std::filesystem::path& path);
Trace load_trace(const std::filesystem::path& path);

}  // namespace infsamp
