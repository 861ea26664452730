#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gemmas/cli.hpp"

namespace gemmas {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(GEMMAS_TEST_DATA_DIR) + "/" + name; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gemmas_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, ValidateExitCodes) {
  auto r = run_cli({"validate", data("worked_example.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("ok (1 traces)"), std::string::npos);

  r = run_cli({"validate", data("cyclic.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("cycle in union graph: 0 -> 1 -> 0"), std::string::npos);

  r = run_cli({"validate", path("missing.json")});
  EXPECT_EQ(r.code, 2);

  r = run_cli({"validate", data("worked_example.json"), data("cyclic.json")});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, AnalyzeGoldenFixtureCsv) {
  const auto r = run_cli({"analyze", "--format", "csv", data("worked_example.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "benchmark,model,method,accuracy,ptok,ctok,ids,upr,best_accuracy,best_ptok,best_ctok,"
            "best_ids,best_upr\n"
            "fixture,hand-built,worked-example,0.0000,1.50,0.30,0.60,0.67,true,true,true,true,true\n");
}

TEST_F(CliTest, AnalyzeMarkdownAndJson) {
  auto r = run_cli({"analyze", data("worked_example.json")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("| worked-example | **0.0000** | **1.50** | **0.30** | **0.60** | **0.67** |"),
            std::string::npos);

  r = run_cli({"analyze", "--format", "json", data("worked_example.json")});
  ASSERT_EQ(r.code, 0);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_NEAR(doc["reports"][0]["metrics"]["ids"].get<double>(), 0.6, 1e-12);
  EXPECT_EQ(doc["reports"][0]["per_problem"][0]["total_paths"], 3);
}

TEST_F(CliTest, AnalyzeRejectsEmptyTraceList) {
  const auto file = write("empty.json",
                          R"({"method":"m","model":"x","benchmark":"b","answer_kind":"numeric","traces":[]})");
  const auto r = run_cli({"analyze", file});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("schema violation at 'traces'"), std::string::npos);
}

TEST_F(CliTest, AnalyzeWritesOutputFile) {
  const auto out = path("table.md");
  const auto r = run_cli({"analyze", "-o", out, data("worked_example.json")});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(slurp(out).find("## fixture"), std::string::npos);
}

TEST_F(CliTest, AnalyzeIsDeterministic) {
  const auto gen = run_cli({"generate", "--problems", "15", "--agents", "5", "--seed", "4"});
  const auto file = write("run.json", gen.out);
  const auto a = run_cli({"analyze", "--format", "csv", "--raw", file});
  const auto b = run_cli({"analyze", "--format", "csv", "--raw", "--workers", "1", file});
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, SweepGrid) {
  auto r = run_cli({"sweep", "--grid", "0:1:0.5", data("worked_example.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("lambda1,mean_ids\n0,", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);

  r = run_cli({"sweep", "--grid", "0.5:0.5:1", "--raw", data("worked_example.json")});
  ASSERT_EQ(r.code, 0);
  const auto analyzed = run_cli({"analyze", "--format", "json", data("worked_example.json")});
  const double ids = nlohmann::json::parse(analyzed.out)["reports"][0]["metrics"]["ids"];
  EXPECT_EQ(r.out, "lambda1,mean_ids\n0.5," + format_decimal(ids) + "\n");

  r = run_cli({"sweep", data("worked_example.json")});
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 12);

  r = run_cli({"sweep", "--grid", "1:0:1", data("worked_example.json")});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, GenerateDeterministicAndDegenerate) {
  const auto a = path("a.json"), b = path("b.json");
  ASSERT_EQ(run_cli({"generate", "--seed", "7", "-o", a}).code, 0);
  ASSERT_EQ(run_cli({"generate", "--seed", "7", "-o", b}).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(run_cli({"validate", a}).code, 0);

  const auto all_right = path("right.json");
  run_cli({"generate", "--correctness", "1.0", "--seed", "1", "-o", all_right});
  auto r = run_cli({"analyze", "--format", "csv", all_right});
  EXPECT_NE(r.out.find("synthetic,synthetic,synthetic,1.0000,"), std::string::npos) << r.out;

  const auto sparse = path("sparse.json");
  run_cli({"generate", "--density", "0", "-o", sparse});
  r = run_cli({"analyze", "--format", "csv", sparse});
  EXPECT_NE(r.out.find(",,,"), std::string::npos) << r.out;  // ids and upr cells empty

  const auto choice = path("choice.json");
  ASSERT_EQ(run_cli({"generate", "--answer-kind", "choice", "--correctness", "1", "-o", choice}).code, 0);
  r = run_cli({"analyze", "--format", "csv", choice});
  EXPECT_NE(r.out.find(",1.0000,"), std::string::npos);
}

TEST_F(CliTest, CompareReferenceRows) {
  auto r = run_cli({"compare", "--format", "csv", data("gsm8k_vanilla_ad.json"),
                    data("gsm8k_g_designer.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy,0.8563,0.8742,+2.1,"), std::string::npos);
  EXPECT_NE(r.out.find("ids,0.39,0.44,+12.8,"), std::string::npos);
  EXPECT_NE(r.out.find("upr,0.4,0.08,-80.0,5.00"), std::string::npos);

  r = run_cli({"compare", "--format", "csv", data("gsm8k_vanilla_ad.json"),
               data("gsm8k_vanilla_ad.json")});
  EXPECT_NE(r.out.find("ids,0.39,0.39,0.0,1.00"), std::string::npos);
}

TEST_F(CliTest, CompareZeroBaselineIsNa) {
  const auto zero = write("zero.json", R"({"benchmark":"b","model":"m","method":"x",
    "metrics":{"accuracy":0.0,"ptok":1,"ctok":1,"ids":0.5,"upr":0.0}})");
  const auto r = run_cli({"compare", "--format", "csv", zero, data("gsm8k_vanilla_ad.json")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("accuracy,0,0.8563,n/a,0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("upr,0,0.4,n/a,0"), std::string::npos);
}

TEST_F(CliTest, CompareRuns) {
  const auto r = run_cli({"compare", data("worked_example.json"), data("worked_example.json")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("| IDS ↑ | 0.6 | 0.6 | 0.0 | 1.00 |"), std::string::npos) << r.out;
}

TEST_F(CliTest, AnalyzeRendersPublishedReports) {
  const auto r = run_cli({"analyze", data("gsm8k_vanilla_ad.json"),
                          data("gsm8k_agentdropout.json"), data("gsm8k_agentprune.json"),
                          data("gsm8k_g_designer.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("| G-Designer | **0.8742** | 9.87 | 2.24 | **0.44** | **0.08** |"),
            std::string::npos);
}

TEST_F(CliTest, ProviderFailureKeepsPartialResults) {
  const auto out = path("table.csv");
  const auto r = run_cli({"analyze", "--provider", "remote", "--remote-url", "http://127.0.0.1:9/none",
                          "--keep-partial", "-o", out, data("gsm8k_vanilla_ad.json"),
                          data("worked_example.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("embedding provider unavailable"), std::string::npos);
  const auto partial = nlohmann::json::parse(slurp(out + ".partial.json"));
  EXPECT_EQ(partial["reports"].size(), 1u);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"bogus"}).code, 2);
  EXPECT_EQ(run_cli({"analyze", "--lambda1", "2", data("minimal.json")}).code, 2);
  EXPECT_EQ(run_cli({"analyze", "--format", "xml", data("minimal.json")}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(CliTest, SyntaxErrorReportsPosition) {
  const auto file = write("bad.json", "{\n  \"method\": \n}");
  const auto r = run_cli({"analyze", file});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace gemmas
