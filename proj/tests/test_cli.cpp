#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "siads/eval.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("siads_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the CLI; stdout/stderr land in files so tests can inspect them.
  int run(const std::string& args) {
    const std::string cmd =
        std::string(SIADS_CLI_PATH) + " " + args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TrainThenDetectCleanTraceExitsZero) {
  ASSERT_EQ(run("gen --scenario urban --samples 30000 --seed 3 -o " + path("clean.csv")), 0);
  ASSERT_EQ(run("train -i " + path("clean.csv") + " -o " + path("ref.lut") + " --bin-width 1 --quantile 1"), 0);
  EXPECT_NE(slurp("stdout.txt").find("seen cells"), std::string::npos);
  EXPECT_EQ(run("detect -i " + path("clean.csv") + " --lut " + path("ref.lut") + " --quantile 1 --events " + path("ev.csv")), 0);
  EXPECT_EQ(slurp("ev.csv"), "index,timestamp,prev_bin,cur_bin,score_bits,mode\n");
}

TEST_F(Cli, CandumpInputRoundTrip) {
  ASSERT_EQ(run("gen --scenario highway --samples 20000 --seed 2 --format candump -o " + path("drive.log")), 0);
  ASSERT_EQ(slurp("drive.log").substr(0, 1), "(");
  ASSERT_EQ(run("train -i " + path("drive.log") + " -o " + path("ref.lut") + " --bin-width 1 --quantile 1"), 0);
  EXPECT_NE(slurp("stdout.txt").find("samples        20000"), std::string::npos);
  EXPECT_EQ(run("detect -i " + path("drive.log") + " --lut " + path("ref.lut") + " --quantile 1"), 0);
}

TEST_F(Cli, InjectedTraceExitsOne) {
  ASSERT_EQ(run("gen --scenario urban --samples 40000 --seed 4 -o " + path("clean.csv")), 0);
  ASSERT_EQ(run("train -i " + path("clean.csv") + " -o " + path("ref.lut") + " --bin-width 1"), 0);
  ASSERT_EQ(run("inject -i " + path("clean.csv") + " -o " + path("bad.csv") + " --truth " + path("truth.csv") +
                " --one-time 2 --replay 2 --min-target 20 --replay-jump 5 --deviation 40 --seed 9"),
            0);
  EXPECT_EQ(run("detect -i " + path("bad.csv") + " --lut " + path("ref.lut") + " --quantile 1 --events " + path("ev.csv")), 1);
  ASSERT_EQ(run("evaluate --events " + path("ev.csv") + " --truth " + path("truth.csv") + " --trace " + path("bad.csv")), 0);
  EXPECT_NE(slurp("stdout.txt").find("detection rate      1.000000"), std::string::npos);
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  ASSERT_EQ(run("gen --samples 5000 -o " + path("clean.csv")), 0);
  EXPECT_EQ(run("train -i " + path("clean.csv") + " -o " + path("ref.lut")), 64);
  EXPECT_NE(slurp("stderr.txt").find("--bin-width"), std::string::npos);

  write("empty.csv", "");
  EXPECT_EQ(run("train -i " + path("empty.csv") + " -o " + path("ref.lut") + " --bin-width 1"), 2);
  EXPECT_NE(slurp("stderr.txt").find("fewer than 2 samples"), std::string::npos);

  EXPECT_EQ(run("train -i " + path("missing.csv") + " -o " + path("ref.lut") + " --bin-width 1"), 3);

  ASSERT_EQ(run("train -i " + path("clean.csv") + " -o " + path("ref.lut") + " --bin-width 1"), 0);
  {
    std::fstream f(path("ref.lut"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put('\x5a');
  }
  EXPECT_EQ(run("detect -i " + path("clean.csv") + " --lut " + path("ref.lut")), 3);
  EXPECT_NE(slurp("stderr.txt").find("checksum"), std::string::npos);

  EXPECT_EQ(run("repro rural"), 64);
  EXPECT_EQ(run("frobnicate"), 64);
  EXPECT_EQ(run("detect -i " + path("clean.csv")), 64);
}

TEST_F(Cli, MalformedLinesAreSkippedWithWarning) {
  write("t.csv", "timestamp,value\n0.0,10\n0.1,11\nnot a number\n0.2,12\n");
  ASSERT_EQ(run("train -i " + path("t.csv") + " -o " + path("ref.lut") + " --bin-width 1"), 0);
  EXPECT_NE(slurp("stderr.txt").find("line 4"), std::string::npos);
}

TEST_F(Cli, ConfigFileSetsFlagsAndCommandLineWins) {
  ASSERT_EQ(run("gen --samples 5000 -o " + path("clean.csv")), 0);
  write("train.conf", "# reference build\nbin-width = 1\nmax = 200\n");
  ASSERT_EQ(run("train --config " + path("train.conf") + " -i " + path("clean.csv") + " -o " + path("ref.lut")), 0);
  EXPECT_NE(slurp("stdout.txt").find("order          201"), std::string::npos);
  ASSERT_EQ(run("train --config " + path("train.conf") + " --max 100 -i " + path("clean.csv") + " -o " + path("ref.lut")), 0);
  EXPECT_NE(slurp("stdout.txt").find("order          101"), std::string::npos);
  write("bad.conf", "no equals sign\n");
  EXPECT_EQ(run("train --config " + path("bad.conf") + " -i " + path("clean.csv") + " -o " + path("ref.lut")), 64);
}

TEST_F(Cli, ReproIsByteIdenticalAcrossRuns) {
  const std::string flags = " --samples 60000 --seed 7";
  ASSERT_EQ(run("repro urban --out-dir " + path("a") + flags), 0);
  ASSERT_EQ(run("repro urban --out-dir " + path("b") + flags), 0);
  for (const char* f : {"trace.csv", "attacked.csv", "campaign.csv", "truth.csv", "events.csv", "report.txt", "report.csv",
                        "plot.csv"}) {
    const auto a = slurp(std::string("a/") + f);
    ASSERT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(std::string("b/") + f)) << f;
  }
  EXPECT_NE(slurp("a/report.txt").find("detection rate      1.000000"), std::string::npos);
}

TEST_F(Cli, MultiSeedOutputDoesNotDependOnJobs) {
  const std::string flags = " --samples 40000 --seeds 3 --sweep";
  ASSERT_EQ(run("repro highway --out-dir " + path("one") + flags + " --jobs 1"), 0);
  ASSERT_EQ(run("repro highway --out-dir " + path("three") + flags + " --jobs 3"), 0);
  EXPECT_EQ(slurp("one/seeds.csv"), slurp("three/seeds.csv"));
  EXPECT_EQ(slurp("one/sweep.csv"), slurp("three/sweep.csv"));
}
