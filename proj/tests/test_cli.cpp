#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kData = SS_DATA_DIR;
const std::string kCli = SS_CLI_PATH;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  CliRun r;
  const std::string cmd = kCli + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (fgets(buf, sizeof buf, p)) r.out += buf;
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ss_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out_flag() const { return " --out " + dir_.string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ValidateExitCodes) {
  EXPECT_EQ(run("validate --input " + kData + "/gamma_ex.json" + out_flag()).code, 0);
  EXPECT_EQ(run("validate --input " + kData + "/thick.json" + out_flag()).code, 0);
  EXPECT_EQ(run("validate --input " + kData + "/fixtures/overlapping_disks.json" + out_flag()).code, 2);
  EXPECT_EQ(run("validate --input " + kData + "/fixtures/broken_inverse.json" + out_flag()).code, 2);
  EXPECT_EQ(run("validate --input " + kData + "/fixtures/malformed.json" + out_flag()).code, 1);
  EXPECT_EQ(run("validate --input " + kData + "/no_such_file.json" + out_flag()).code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
}

TEST_F(CliTest, PipelineInfeasibleExitsFour) {
  const CliRun r = run("pipeline --input " + kData + "/fixtures/tiny_scale.json --n 1 --beta 0.6" + out_flag());
  EXPECT_EQ(r.code, 4) << r.out;
}

TEST_F(CliTest, OtherFailureCodes) {
  EXPECT_EQ(run("count --n 1 --radius 1000" + out_flag()).code, 4);
  EXPECT_EQ(run("audit --input " + kData + "/gamma_ex.json --tau 5" + out_flag()).code, 4);
  EXPECT_EQ(run("zeros --input " + kData + "/thick.json --n 2" + out_flag()).code, 2);
}

TEST_F(CliTest, DeltaReportLayout) {
  const CliRun r = run("delta --input " + kData + "/gamma_ex.json --label ex" + out_flag());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(std::stod(r.out), 0.3274459217324397, 1e-12);
  const fs::path d = dir_ / "delta" / "ex";
  ASSERT_TRUE(fs::exists(d / "report.json"));
  ASSERT_TRUE(fs::exists(d / "config.json"));
  const auto rep = nlohmann::json::parse(slurp(d / "report.json"));
  EXPECT_TRUE(rep.contains("config"));
  EXPECT_TRUE(rep.contains("result"));
  EXPECT_EQ(rep["content_hash"].get<std::string>().size(), 64u);
  EXPECT_EQ(rep["config"]["command"], "delta");
}

TEST_F(CliTest, CountWitnessesAndHashStability) {
  ASSERT_EQ(run("count --n 2 --radius 10 --label a" + out_flag()).code, 0);
  ASSERT_EQ(run("count --n 2 --radius 10 --label b" + out_flag()).code, 0);
  const std::string a = slurp(dir_ / "count" / "a" / "grid.csv");
  const std::string b = slurp(dir_ / "count" / "b" / "grid.csv");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("# config:", 0), 0u);
  std::istringstream in(a);
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("a,", 0) != 0) ++rows;
  EXPECT_EQ(rows, 48);
  const auto ra = nlohmann::json::parse(slurp(dir_ / "count" / "a" / "report.json"));
  const auto rb = nlohmann::json::parse(slurp(dir_ / "count" / "b" / "report.json"));
  EXPECT_EQ(ra["content_hash"], rb["content_hash"]);
  EXPECT_EQ(ra["result"]["count"], 48);
}

TEST_F(CliTest, DefaultLabelFromConfigHash) {
  ASSERT_EQ(run("count --n 3 --radius 10" + out_flag()).code, 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "count")) {
    ++dirs;
    EXPECT_EQ(e.path().filename().string().size(), 12u);
  }
  EXPECT_EQ(dirs, 1);
}

TEST_F(CliTest, ZetaGridAndZeros) {
  const CliRun g = run("zeta-grid --input " + kData + "/gamma_ex.json --classical --region 0.5,1,0,0 --step 0.25 --label g" +
                    out_flag());
  ASSERT_EQ(g.code, 0) << g.out;
  const std::string csv = slurp(dir_ / "zeta-grid" / "g" / "grid.csv");
  EXPECT_NE(csv.find("re_s,im_s,re_zeta,im_zeta,log10_abs_zeta"), std::string::npos);
  const CliRun z = run("zeros --input " + kData + "/gamma_ex.json --classical --region 0.1,1.1,-0.5,0.5 --label z" +
                    out_flag());
  ASSERT_EQ(z.code, 0) << z.out;
  const auto rep = nlohmann::json::parse(slurp(dir_ / "zeros" / "z" / "report.json"));
  ASSERT_EQ(rep["result"]["zeros"].size(), 1u);
  EXPECT_NEAR(rep["result"]["zeros"][0]["re"].get<double>(), 0.3274459217324397, 1e-8);
  EXPECT_EQ(rep["result"]["counts"]["argument_principle"], 1);
}

TEST_F(CliTest, Audits) {
  const CliRun a = run("audit --input " + kData + "/gamma_ex.json --max-len 6 --label l" + out_flag());
  ASSERT_EQ(a.code, 0) << a.out;
  const auto rep = nlohmann::json::parse(slurp(dir_ / "audit" / "l" / "report.json"));
  EXPECT_TRUE(rep["result"]["nesting"].get<bool>());
  const CliRun p = run("audit --input " + kData + "/gamma_ex.json --tau 0.02 --n 2 --label p" + out_flag());
  ASSERT_EQ(p.code, 0) << p.out;
  const auto rp = nlohmann::json::parse(slurp(dir_ / "audit" / "p" / "report.json"));
  EXPECT_EQ(rp["result"]["pairs"], 48);
}
