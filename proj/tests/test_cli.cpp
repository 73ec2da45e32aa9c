#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "screenlab/screening.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("screenlab-cli-" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " " + SCREENLAB_CLI + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out() const { return (dir_ / "out").string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> v;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) v.push_back(line);
    return v;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateWritesOneRowPerCohortScreen) {
  ASSERT_EQ(run("simulate -N 500 -K 1 --interval 1 --seed 3 -o " + out()), 0) << slurp(dir_ / "stderr.txt");
  const fs::path counts = dir_ / "out" / "simulate-seed-3" / "counts.csv";
  EXPECT_EQ(lines(counts).size(), 26u);
  EXPECT_EQ(lines(counts).front(), "t0,k,n,s,r");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "simulate-seed-3" / "config.json"));
  EXPECT_NE(slurp(dir_ / "stdout.txt").find("cohorts="), std::string::npos);
}

TEST_F(Cli, SameSeedGivesIdenticalFiles) {
  ASSERT_EQ(run("simulate -N 300 --seed 11 --case-dump -o " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run("simulate -N 300 --seed 11 --case-dump --threads 1 -o " + (dir_ / "b").string()), 0);
  for (const char* name : {"counts.csv", "cases.csv"}) {
    const std::string a = slurp(dir_ / "a" / "simulate-seed-11" / name);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir_ / "b" / "simulate-seed-11" / name)) << name;
  }
}

TEST_F(Cli, SeedFallsBackToEnvironment) {
  ASSERT_EQ(run("simulate -N 100 -K 2 -o " + out(), "SCREENLAB_SEED=555"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "simulate-seed-555" / "counts.csv"));
}

TEST_F(Cli, ZeroRiskGivesNoEvents) {
  ASSERT_EQ(run("simulate -N 400 --risk 0 --seed 1 -o " + out()), 0);
  const auto table = screenlab::CountsTable::load((dir_ / "out" / "simulate-seed-1" / "counts.csv").string());
  EXPECT_EQ(table.total_screen_detected(), 0);
  EXPECT_EQ(table.total_interval(), 0);
  for (const auto& c : table.cells()) EXPECT_EQ(c.n, 400);
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  std::ofstream(dir_ / "cfg.json") << R"({"seed": 7, "design": {"screens": 3, "cohort_size": 200}})";
  ASSERT_EQ(run("simulate -c " + (dir_ / "cfg.json").string() + " -K 2 -o " + out()), 0);
  const auto rows = lines(dir_ / "out" / "simulate-seed-7" / "counts.csv");
  EXPECT_EQ(rows.size(), 1u + 25u * 2u);
  const auto echoed = nlohmann::json::parse(slurp(dir_ / "out" / "simulate-seed-7" / "config.json"));
  EXPECT_EQ(echoed["design"]["screens"], 2);
  EXPECT_EQ(echoed["design"]["cohort_size"], 200);
}

TEST_F(Cli, ExitCodesSeparateFailureKinds) {
  EXPECT_EQ(run("estimate " + (dir_ / "missing.csv").string() + " -o " + out()), 3);
  std::ofstream(dir_ / "bad.csv") << "t0,k,n,s,r\n40,1,10,x,0\n";
  EXPECT_EQ(run("estimate " + (dir_ / "bad.csv").string() + " -o " + out()), 3);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("row 2"), std::string::npos);
  EXPECT_EQ(run("simulate -N 0 -o " + out()), 2);
  EXPECT_EQ(run("simulate --interval -1 -K 0 -o " + out()), 2);
  EXPECT_EQ(run("simulate --no-such-flag"), 2);
  std::ofstream(dir_ / "broken.json") << "{ not json";
  EXPECT_EQ(run("simulate -c " + (dir_ / "broken.json").string() + " -o " + out()), 2);
}

TEST_F(Cli, EstimateWithFixedSlope) {
  ASSERT_EQ(run("simulate -N 1000 --seed 4 -o " + out()), 0);
  const fs::path counts = dir_ / "out" / "simulate-seed-4" / "counts.csv";
  const int code = run("estimate " + counts.string() + " --fix-b1 --restarts 2 --seed 4 -o " + out());
  ASSERT_TRUE(code == 0 || code == 4) << slurp(dir_ / "stderr.txt");
  const auto fit = nlohmann::json::parse(slurp(dir_ / "out" / "estimate-seed-4" / "fit.json"));
  EXPECT_EQ(fit["fix_b1"], true);
  EXPECT_EQ(fit["theta"]["sensitivity"]["b1"], 0.0);
  EXPECT_FALSE(fit["estimates"].contains("b1"));
  EXPECT_EQ(code == 0, fit["converged"].get<bool>());
}

TEST_F(Cli, ModelDumpAndRidge) {
  ASSERT_EQ(run("model-dump -K 5 --interval 2 --seed 1 -o " + out()), 0) << slurp(dir_ / "stderr.txt");
  EXPECT_EQ(lines(dir_ / "out" / "model-dump-seed-1" / "model_dump.csv").size(), 1u + 25u * 5u);

  ASSERT_EQ(run("simulate -N 500 --seed 2 -g gamma -o " + out()), 0);
  const fs::path counts = dir_ / "out" / "simulate-seed-2" / "counts.csv";
  ASSERT_EQ(run("estimate " + counts.string() + " -f gamma --restarts 1 --seed 2 -o " + out()) % 4, 0);
  const fs::path fit = dir_ / "out" / "estimate-seed-2" / "fit.json";
  ASSERT_EQ(run("ridge " + counts.string() + " --theta " + fit.string() + " --count 5 --seed 2 -o " + out()), 0)
      << slurp(dir_ / "stderr.txt");
  const auto rows = lines(dir_ / "out" / "ridge-seed-2" / "ridge.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows.front(), "index,alpha,beta,negloglik");
  EXPECT_EQ(rows[1].substr(0, 7), "0,1,0.4");
}

TEST_F(Cli, ScenarioAndMisspecReports) {
  std::ofstream(dir_ / "small.json") << R"({"design": {"cohort_size": 300}})";
  const std::string common = " --restarts 1 --seed 6 -c " + (dir_ / "small.json").string() + " -o " + out();
  const int scen = run("scenario -g exponential" + common);
  ASSERT_TRUE(scen == 0 || scen == 4) << slurp(dir_ / "stderr.txt");
  const auto rows = lines(dir_ / "out" / "scenario-exponential-seed-6" / "report.csv");
  ASSERT_EQ(rows.size(), 6u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(rows[i + 2].substr(0, 3), "S" + std::to_string(i + 1) + ",");
  for (const char* f : {"counts_program_a.csv", "counts_program_b.csv", "fit_s1.json", "fit_s4.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "out" / "scenario-exponential-seed-6" / f)) << f;
  }

  const int mis = run("misspec" + common);
  ASSERT_TRUE(mis == 0 || mis == 4) << slurp(dir_ / "stderr.txt");
  EXPECT_EQ(lines(dir_ / "out" / "misspec-seed-6" / "report.csv").size(), 10u);
}

TEST_F(Cli, Replicate) {
  const int code = run("replicate --participants 20000 --seed 8 -o " + out());
  ASSERT_TRUE(code == 0 || code == 4) << slurp(dir_ / "stderr.txt");
  const auto rows = lines(dir_ / "out" / "replicate-seed-8" / "report.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows.front(), "fitted,mst,mst_sd,negloglik,converged");
}
