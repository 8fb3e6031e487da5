#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace infsamp::cli {
namespace {

struct Outcome {
  int status = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int status = run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("infsamp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string worked_trace() const {
    const auto p = path("worked.csv");
    std::ofstream(p) << "# prompt_len=0 seed=0\nid,true_len,pred_len\n0,5,\n1,3,\n2,4,\n3,2,\n";
    return p;
  }

  fs::path dir_;
};

TEST_F(CliTest, GenTraceDegenerate) {
  const auto out = path("t.csv");
  const auto r = invoke({"gen-trace", "--dist", "uniform:7:7", "--count", "4", "--out", out});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(out), "# prompt_len=0 seed=0\nid,true_len,pred_len\n0,7,\n1,7,\n2,7,\n3,7,\n");
  EXPECT_EQ(r.out, "count=4 mean=7.000000 max=7\n");
}

TEST_F(CliTest, GenTraceGolden) {
  const auto out = path("t.csv");
  const auto r = invoke({"gen-trace", "--dist", "lognormal:5.0:0.6", "--count", "32", "--seed", "42", "--out", out});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(out), slurp(INFSAMP_TEST_DATA_DIR "/trace_lognormal_5_0.6_n32_s42.csv"));
}

TEST_F(CliTest, GenTraceMissingOutIsUsageError) {
  const auto r = invoke({"gen-trace", "--count", "4"});
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u);
}

TEST_F(CliTest, CompareNaiveFixed) {
  const auto r = invoke({"compare", "--trace", worked_trace(), "--micro-size", "2", "--strategies", "naive,fixed"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out,
            "strategy,total_steps,step_ratio,avg_len,len_ratio,peak_kv_tokens\n"
            "naive,9,1.000000,3.500000,1.000000,6\n"
            "fixed,7,0.777778,3.500000,1.000000,7\n");
}

TEST_F(CliTest, CompareOracleAlone) {
  const auto r = invoke({"compare", "--trace", worked_trace(), "--micro-size", "2", "--strategies", "oracle"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("oracle,7,1.000000,"), std::string::npos);
}

TEST_F(CliTest, CompareSchedulersJsonLines) {
  const auto r = invoke({"compare", "--trace", worked_trace(), "--micro-size", "2", "--schedulers",
                         "fifo,fptas-only,sjf-only,infinite", "--format", "json-lines"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(line.front(), '{');
    ++n;
  }
  EXPECT_EQ(n, 4);
  EXPECT_NE(r.out.find("\"strategy\":\"fifo\",\"total_steps\":7,\"step_ratio\":1.0"), std::string::npos);
}

TEST_F(CliTest, CompareRejectsBothLists) {
  const auto r = invoke({"compare", "--trace", worked_trace(), "--strategies", "naive", "--schedulers", "fifo"});
  EXPECT_EQ(r.status, 2);
}

TEST_F(CliTest, EngineErrorsArePrefixed) {
  const auto r = invoke({"compare", "--trace", worked_trace(), "--micro-size", "3", "--strategies", "naive"});
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.err.rfind("error: config: ", 0), 0u);
  const auto missing = invoke({"simulate", "--trace", path("nope.csv")});
  EXPECT_EQ(missing.status, 1);
  EXPECT_EQ(missing.err.rfind("error: io: ", 0), 0u);
}

TEST_F(CliTest, SimulateJson) {
  const auto r = invoke({"simulate", "--trace", worked_trace(), "--micro-size", "2", "--strategy", "infinite", "--log"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["total_steps"], 9);
  EXPECT_EQ(j["strategy"], "infinite");
  EXPECT_TRUE(j.contains("schedule_log"));
}

TEST_F(CliTest, PlanExport) {
  const auto p = path("t.csv");
  std::ofstream(p) << "id,true_len,pred_len\n0,10,\n1,1,\n2,1,\n3,1,\n";
  const auto r = invoke({"plan", "--trace", p, "--micro-size", "2", "--epsilon", "0.1"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out,
            "# K=0.65000000000000002 capacity=11 overflow=0\n"
            "id,group,position,scaled_len\n"
            "0,1,0,16\n1,2,0,2\n2,2,1,2\n3,2,2,2\n");
}

TEST_F(CliTest, MemoryConstantLengths) {
  const auto model = path("unit.cfg");
  std::ofstream(model) << "layers=1\nkv_heads=1\nhead_dim=1\nbytes_per_element=1\n";
  const auto r = invoke({"memory", "--model-config", model, "--group-sizes", "8,16", "--micro-sizes", "2", "--dist",
                         "uniform:10:10"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "G,g,strategy,peak_bytes\n8,8,full,160\n8,2,naive,40\n16,16,full,320\n16,2,naive,40\n");
}

TEST_F(CliTest, MemoryQwenLikeConfig) {
  const auto model = path("qwen.cfg");
  std::ofstream(model) << "layers=28\nkv_heads=8\nhead_dim=128\nbytes_per_element=2\n";
  const auto r = invoke({"memory", "--model-config", model, "--group-sizes", "4", "--micro-sizes", "4", "--dist",
                         "uniform:1:1"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "G,g,strategy,peak_bytes\n4,4,full,458752\n4,4,naive,458752\n");
}

TEST_F(CliTest, MemoryConfigErrors) {
  EXPECT_EQ(invoke({"memory", "--model-config", path("missing.cfg")}).status, 1);
  const auto model = path("bad.cfg");
  std::ofstream(model) << "layers=1\nkv_head=1\n";
  const auto r = invoke({"memory", "--model-config", model});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("kv_head"), std::string::npos);
}

TEST_F(CliTest, ObjectiveMicroEqualsFull) {
  std::ofstream(path("tok.csv")) << "sample_id,logp_new,logp_old,logp_ref\n0,-1,-1.1,-1.2\n0,-2,-2,-2\n"
                                    "1,-0.5,-0.4,-0.6\n2,-3,-3.5,-2\n3,-1,-1,-1\n3,-4,-3.9,-4.2\n";
  std::ofstream(path("rw.csv")) << "sample_id,rm_score\n0,1.0\n1,0.0\n2,0.5\n3,2.0\n";
  const auto r = invoke({"objective", "--tokens", path("tok.csv"), "--rewards", path("rw.csv"), "--micro-size", "2",
                         "--beta", "0.1"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  double total = 0.0;
  double full = 1.0;
  while (std::getline(lines, line)) {
    if (line.rfind("total,", 0) == 0) total = std::stod(line.substr(6));
    if (line.rfind("full,", 0) == 0) full = std::stod(line.substr(5));
  }
  EXPECT_NEAR(total, full, 1e-12);
}

TEST_F(CliTest, ManifestRerunIsByteIdentical) {
  const auto out = path("cmp.csv");
  const auto manifest = path("cmp.manifest.json");
  const auto r = invoke({"compare", "--trace", worked_trace(), "--micro-size", "2", "--strategies",
                         "naive,fixed,infinite", "--out", out, "--manifest", manifest});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto m = nlohmann::json::parse(slurp(manifest));
  EXPECT_EQ(m["version"], version());
  EXPECT_EQ(m["artifacts"][0]["sha256"], sha256_file(out));
  EXPECT_EQ(m["inputs"].size(), 1u);

  const auto rerun = invoke({"rerun", "--manifest", manifest, "--out-dir", path("again")});
  ASSERT_EQ(rerun.status, 0) << rerun.err;
  EXPECT_EQ(slurp(out), slurp(path("again/cmp.csv")));
}

TEST_F(CliTest, RerunDetectsChangedInput) {
  const auto trace = worked_trace();
  const auto manifest = path("m.json");
  ASSERT_EQ(invoke({"simulate", "--trace", trace, "--micro-size", "2", "--out", path("s.json"), "--manifest",
                    manifest})
                .status,
            0);
  std::ofstream(trace, std::ios::app) << "4,9,\n";
  const auto r = invoke({"rerun", "--manifest", manifest});
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.err.rfind("error: integrity: ", 0), 0u);
}

TEST_F(CliTest, ManifestNeedsOut) {
  const auto r = invoke({"simulate", "--trace", worked_trace(), "--micro-size", "2", "--manifest", path("m.json")});
  EXPECT_EQ(r.status, 1);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_bytes("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace infsamp::cli
