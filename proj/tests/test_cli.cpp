// Copyright 2026 The photonloop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("photonloop_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  /// Runs the binary with stdout and stderr captured to files; returns the exit status.
  int run(const std::string &args) {
    const std::string cmd = std::string("\"") + PHOTONLOOP_CLI_PATH + "\" " + args + " >\"" + path("stdout").string() +
                            "\" 2>\"" + path("stderr").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path path(const std::string &name) const { return dir_ / name; }

  static std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string out() const { return slurp(path("stdout")); }
  std::string err() const { return slurp(path("stderr")); }

  void write(const std::string &name, const std::string &text) const { std::ofstream(path(name)) << text; }

 private:
  fs::path dir_;
};

std::size_t count_lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, BoundsLine) {
  ASSERT_EQ(run("bounds --n 4"), 0);
  EXPECT_EQ(out(), "n=4 thermal_max=0.08192 (lambda*=0.8) poisson_max=0.19537 (mu*=4)\n");
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("bounds --n 0"), 2);
  EXPECT_EQ(run("launch"), 2);
  EXPECT_EQ(run("simulate --format xml"), 2);
  EXPECT_EQ(run("order-opt --n 9 --mode exhaustive --trials 10"), 2);
  EXPECT_NE(err().find("order_opt.N"), std::string::npos);
  EXPECT_EQ(run("simulate --config \"" + path("missing.json").string() + "\""), 2);
}

TEST_F(Cli, ConfigErrorsNameTheField) {
  write("bad.json", R"({"detector": {"efficiency": 1.2}})");
  EXPECT_EQ(run("simulate --config \"" + path("bad.json").string() + "\""), 2);
  EXPECT_NE(err().find("detector.efficiency"), std::string::npos);
}

TEST_F(Cli, SimulateEchoesDrawnSeed) {
  write("cfg.json", R"({"target": {"kind": "fock", "N": 1}})");
  ASSERT_EQ(run("simulate --config \"" + path("cfg.json").string() + "\" --trials 300"), 0);
  const auto j = nlohmann::json::parse(out());
  ASSERT_TRUE(j["config"].contains("seed"));
  const auto seed = j["seed"].get<std::uint64_t>();
  EXPECT_EQ(j["config"]["seed"].get<std::uint64_t>(), seed);
  const std::string first = out();
  ASSERT_EQ(run("simulate --config \"" + path("cfg.json").string() + "\" --trials 300 --seed " + std::to_string(seed)),
            0);
  EXPECT_EQ(out(), first);
}

TEST_F(Cli, TraceHasOneRowPerPass) {
  const std::string file = path("sim.json").string();
  ASSERT_EQ(run("simulate --trials 1 --seed 9 --trace --out \"" + file + "\""), 0);
  const auto j = nlohmann::json::parse(slurp(file));
  const std::string trace = slurp(file + ".trace.csv");
  const auto passes = static_cast<std::size_t>(j["mean_passes"].get<double>());
  EXPECT_EQ(count_lines(trace), 1 + passes);
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "trial,pass_index,pairs_true,pairs_announced,photons_lost,epsilon_used");
}

TEST_F(Cli, OutputIsByteIdenticalAcrossRunsAndThreads) {
  write("sweep.json", R"({"sweep": {"targets": [{"kind": "fock", "N": 2}, {"kind": "noon", "N": 2}],
                                    "T_grid": [0.98, 1.0], "eta_set": [0.9]}})");
  const std::string base = "sweep --config \"" + path("sweep.json").string() + "\" --seed 77 --trials 3000 ";
  ASSERT_EQ(run(base + "--threads 1 --out \"" + path("a.csv").string() + "\""), 0);
  ASSERT_EQ(run(base + "--threads 1 --out \"" + path("b.csv").string() + "\""), 0);
  ASSERT_EQ(run(base + "--threads 8 --out \"" + path("c.csv").string() + "\""), 0);
  const std::string a = slurp(path("a.csv"));
  EXPECT_EQ(count_lines(a), 5u);
  EXPECT_EQ(a, slurp(path("b.csv")));
  EXPECT_EQ(a, slurp(path("c.csv")));
  EXPECT_FALSE(fs::exists(path("a.csv.partial")));
}

TEST_F(Cli, OrderOptHeuristicRuns) {
  ASSERT_EQ(run("order-opt --n 3 --epsilon 0.1 --mode heuristic --trials 200 --seed 2 --threads 2"), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_EQ(j["mode"], "heuristic");
  EXPECT_EQ(j["permutation"].size(), 3u);
}
