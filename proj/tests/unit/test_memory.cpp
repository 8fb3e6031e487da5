#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "infsamp/error.hpp"
#include "infsamp/memory.hpp"

namespace infsamp {
namespace {

KvModel model(std::int64_t layers, std::int64_t heads, std::int64_t dim, std::int64_t bytes) {
  KvModel m;
  m.layers = layers;
  m.kv_heads = heads;
  m.head_dim = dim;
  m.bytes_per_element = bytes;
  return m;
}

TEST(KvBytes, Examples) {
  EXPECT_EQ(kv_bytes_per_token(model(2, 2, 4, 2)), 64);
  EXPECT_EQ(kv_bytes_per_token(model(1, 1, 1, 1)), 2);
  EXPECT_EQ(kv_bytes_per_token(model(4, 2, 4, 2)), 128);
  EXPECT_EQ(kv_bytes_per_token(model(28, 8, 128, 2)), 114688);
}

TEST(KvBytes, Validation) {
  EXPECT_THROW(kv_bytes_per_token(model(0, 1, 1, 1)), ConfigError);
  auto m = model(1, 1, 1, 1);
  m.weight_bytes = -1;
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_THROW(kv_bytes_per_token(model(std::int64_t{1} << 40, 1 << 20, 1 << 20, 2)), CapacityError);
}

TEST(PeakBytes, Product) {
  SimResult r;
  r.peak_kv_tokens = 10;
  EXPECT_EQ(peak_bytes(r, model(2, 2, 4, 2)), 640);
  auto m = model(2, 2, 4, 2);
  m.weight_bytes = 1000;
  EXPECT_EQ(peak_bytes(r, m), 1640);
}

TEST(PeakBytes, FullOnTwoEqualSamples) {
  SimConfig cfg;
  cfg.strategy = Strategy::full;
  const auto r = simulate(make_trace(std::vector<std::int64_t>{2, 2}), cfg);
  EXPECT_EQ(peak_bytes(r, model(1, 1, 1, 1)), 8);
}

TEST(PeakBytes, PromptMismatch) {
  SimResult r;
  r.prompt_len = 5;
  EXPECT_THROW(peak_bytes(r, model(1, 1, 1, 1)), ConfigError);
}

TEST(ModelConfig, Parse) {
  std::istringstream in("# qwen-like\nlayers=28\nkv_heads = 8\nhead_dim=128\nbytes_per_element=2\nweight_bytes=5\n");
  const auto m = read_kv_model(in);
  EXPECT_EQ(m.layers, 28);
  EXPECT_EQ(m.kv_heads, 8);
  EXPECT_EQ(m.weight_bytes, 5);
  EXPECT_EQ(m.prompt_len, 0);
}

TEST(ModelConfig, ErrorsNameTheKey) {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_kv_model(in);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("layers=1\nkv_heads=1\nhead_dim=1\nbytes_per_element=1\ncolor=3\n").find("color"),
            std::string::npos);
  EXPECT_NE(message("layers=1\nkv_heads=1\nhead_dim=1\n").find("bytes_per_element"), std::string::npos);
  EXPECT_NE(message("layers=x\nkv_heads=1\nhead_dim=1\nbytes_per_element=1\n").find("layers"), std::string::npos);
  EXPECT_NE(message("layers=0\nkv_heads=1\nhead_dim=1\nbytes_per_element=1\n").find("layers"), std::string::npos);
  EXPECT_THROW(load_kv_model("/nonexistent/model.cfg"), IoError);
}

TEST(ScalingReport, ConstantLengths) {
  std::vector<Trace> traces;
  for (int G : {8, 16, 32}) traces.push_back(make_trace(std::vector<std::int64_t>(static_cast<std::size_t>(G), 10)));
  const std::vector<int> gs{2};
  const auto rows = scaling_report(traces, model(1, 1, 1, 1), gs);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    EXPECT_EQ(rows[i].strategy, Strategy::full);
    EXPECT_EQ(rows[i].micro_size, rows[i].group_size);
    EXPECT_EQ(rows[i].peak_kv_tokens, rows[i].group_size * 10);
    EXPECT_EQ(rows[i + 1].strategy, Strategy::naive);
    EXPECT_EQ(rows[i + 1].peak_kv_tokens, 2 * 10);
  }
  EXPECT_EQ(rows[4].peak_bytes, 4 * rows[0].peak_bytes);
}

TEST(ScalingReport, DivisibilityRequired) {
  const std::vector<int> Gs{8};
  const std::vector<int> gs{3};
  EXPECT_THROW(scaling_report(TraceGenerator{Lognormal{5.0, 0.6}, 1024, 1}, model(1, 1, 1, 1), Gs, gs), ConfigError);
}

TEST(ScalingReport, GoldenLognormal) {
  const std::vector<int> Gs{8, 16, 32};
  const std::vector<int> gs{1, 2, 4};
  const auto rows = scaling_report(TraceGenerator{Lognormal{5.0, 0.6}, 1024, 42}, model(1, 1, 1, 1), Gs, gs);
  std::ostringstream os;
  write_scaling_csv(rows, os);
  std::ifstream golden(INFSAMP_TEST_DATA_DIR "/memory_lognormal_5_0.6_s42.csv", std::ios::binary);
  ASSERT_TRUE(golden) << "missing golden file";
  std::stringstream expected;
  expected << golden.rdbuf();
  EXPECT_EQ(os.str(), expected.str());
}

TEST(ScalingReport, NaiveNeverExceedsFull) {
  const std::vector<int> Gs{8, 16, 32};
  const std::vector<int> gs{1, 2, 4, 8};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rows = scaling_report(TraceGenerator{Lognormal{5.0, 0.8}, 1024, seed}, model(1, 1, 1, 1), Gs, gs);
    std::int64_t full = 0;
    for (const auto& r : rows) {
      if (r.strategy == Strategy::full) {
        full = r.peak_kv_tokens;
      } else {
        EXPECT_LE(r.peak_kv_tokens, full);
        EXPECT_LE(r.peak_kv_tokens, r.micro_size * 1024);
      }
    }
  }
}

}  // namespace
}  // namespace infsamp
