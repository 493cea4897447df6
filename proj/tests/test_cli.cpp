#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(HEXSIM_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hexsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenTerrainStairsLevelZero) {
  const auto r = run("gen-terrain --task stairs --level 0 --total-levels 10 --seed 1 --out " + path("a.hxm"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("riser 0.045"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("tread 0.3"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(path("a.hxm")).substr(0, 4), "HXHM");
}

TEST_F(Cli, GenTerrainSqueezeTopLevel) {
  const auto r = run("gen-terrain --task squeeze --level 10 --total-levels 10 --out " + path("t.hxm"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("clearance 0.31"), std::string::npos) << r.out;
}

TEST_F(Cli, GenTerrainIsReproducible) {
  for (const char* task : {"joist", "stairs", "avoidance", "squeeze"}) {
    const std::string args = std::string("gen-terrain --task ") + task + " --level 4 --seed 12 --out ";
    ASSERT_EQ(run(args + path("1.hxm")).code, 0);
    ASSERT_EQ(run(args + path("2.hxm")).code, 0);
    EXPECT_EQ(slurp(path("1.hxm")), slurp(path("2.hxm"))) << task;
  }
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("gen-terrain --task flying --out " + path("x.hxm")).code, 2);
  EXPECT_EQ(run("gen-terrain --task stairs --level 11 --total-levels 10 --out " + path("x.hxm")).code, 2);
  EXPECT_EQ(run("serve --port 70000").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("rollout --policy teleport").code, 2);
  EXPECT_EQ(run("train --budget 0 --out " + path("o")).code, 2);
}

TEST_F(Cli, RolloutTripodCompletesStairs) {
  const auto r = run("rollout --task stairs --level 0 --policy tripod --trace " + path("trace.csv"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("stairs completed 8"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("done task_complete"), std::string::npos) << r.out;
  std::istringstream trace(slurp(path("trace.csv")));
  std::string header, line, last;
  std::getline(trace, header);
  EXPECT_EQ(header.rfind("step,x,y,z,roll,pitch,yaw,b,stairs_completed", 0), 0u);
  int rows = 0;
  while (std::getline(trace, line)) {
    last = line;
    ++rows;
  }
  EXPECT_GT(rows, 10);
  EXPECT_NE(last.find("task_complete"), std::string::npos);
}

TEST_F(Cli, RolloutTimeoutExitsOne) {
  const auto r = run("rollout --task avoidance --level 3 --policy random --steps 20");
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("steps "), std::string::npos);
  EXPECT_EQ(run("rollout --task avoidance --level 3 --policy random --steps 20").out, r.out);
}

TEST_F(Cli, RolloutWritesDepthFrames) {
  const auto r = run("rollout --task stairs --policy tripod --steps 6 --depth-dir " + path("depth") + " --depth-every 3");
  EXPECT_EQ(r.code, 1);
  int frames = 0;
  for (const auto& e : fs::directory_iterator(path("depth"))) frames += e.path().extension() == ".pgm";
  EXPECT_GE(frames, 2);
}

TEST_F(Cli, TrainBudgetOneWritesOneHistoryRow) {
  const auto r = run("train --task stairs --budget 1 --episodes 1 --episode-steps 30 --out " + path("o"));
  EXPECT_EQ(r.code, 0);
  std::istringstream hist(slurp(path("o/history.csv")));
  std::string line;
  int rows = 0;
  while (std::getline(hist, line)) ++rows;
  EXPECT_EQ(rows, 2);  // header + start point
  EXPECT_NE(slurp(path("o/best_params.txt")).find("frequency"), std::string::npos);
}

TEST_F(Cli, TrainIsDeterministicAndParamsReplay) {
  const std::string args = "train --task stairs --budget 17 --episodes 1 --episode-steps 30 --seed 5 --out ";
  ASSERT_EQ(run(args + path("a")).code, 0);
  ASSERT_EQ(run(args + path("b")).code, 0);
  EXPECT_EQ(slurp(path("a/history.csv")), slurp(path("b/history.csv")));
  const auto r = run("rollout --task stairs --policy params-file --params " + path("a/best_params.txt") + " --steps 10");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("done timeout"), std::string::npos);
}
