// Copyright 2026 The dpsc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the dpsc binary end to end and checks exit codes and outputs.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dpsc/case_io.h"
#include "dpsc/common.h"
#include "dpsc/outcome_io.h"
#include "dpsc/sysmodel.h"
#include "test_util.h"

namespace dpsc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::path(::testing::TempDir()) / "dpsc_cli" / info->name();
    fs::remove_all(root_);
    fs::create_directories(root_);
  }

  std::string Dir(const std::string& name) const {
    return (root_ / name).string();
  }

  int Dpsc(const std::string& args) const {
    const std::string cmd = std::string(DPSC_CLI_PATH) + " " + args +
                            " > /dev/null 2> " +
                            (root_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string Stderr() const {
    return ReadFile((root_ / "stderr.txt").string());
  }

  static json Manifest(const std::string& dir) {
    return json::parse(ReadFile(dir + "/manifest.json"));
  }

  // Every file of `a` exists in `b` with the same bytes, and vice versa.
  static void ExpectSameFiles(const std::string& a, const std::string& b) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) {
      names.insert(e.path().filename().string());
    }
    std::set<std::string> other;
    for (const auto& e : fs::directory_iterator(b)) {
      other.insert(e.path().filename().string());
    }
    EXPECT_EQ(names, other);
    for (const std::string& n : names) {
      EXPECT_EQ(ReadFile(a + "/" + n), ReadFile(b + "/" + n)) << n;
    }
  }

  void ExpectReplayIdentical(const std::string& args) {
    const std::string first = Dir("first");
    const std::string second = Dir("second");
    ASSERT_EQ(Dpsc(args + " --out " + first), 0) << Stderr();
    ASSERT_EQ(
        Dpsc("replay --manifest " + first + "/manifest.json --out " + second),
        0)
        << Stderr();
    ExpectSameFiles(first, second);
  }

  fs::path root_;
};

TEST_F(CliTest, ClearWritesBothMarkets) {
  const std::string out = Dir("clear");
  ASSERT_EQ(Dpsc("clear --out " + out), 0) << Stderr();
  for (const char* f : {"leader.json", "follower.json", "prices.csv",
                        "heat.csv", "dispatch.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out + "/" + f)) << f;
  }
  const json leader = json::parse(ReadFile(out + "/leader.json"));
  EXPECT_GT(leader["cost_eur"].get<double>(), 0.0);
  EXPECT_EQ(Manifest(out)["command"], "clear");
  EXPECT_EQ(Manifest(out)["outputs"].size(), 5u);
}

TEST_F(CliTest, MissingCaseExitsTwo) {
  EXPECT_EQ(Dpsc("clear --case " + Dir("absent.json") + " --out " + Dir("o")),
            2);
  EXPECT_THAT(Stderr(), ::testing::HasSubstr("not found"));
}

TEST_F(CliTest, InfeasibleStressedCaseExitsThree) {
  EXPECT_EQ(Dpsc("clear --eta-h 5 --out " + Dir("o")), 3);
  EXPECT_THAT(Stderr(), ::testing::HasSubstr("heat zone"));
}

TEST_F(CliTest, BadFlagsExitTwoBeforeAnyOutput) {
  EXPECT_EQ(Dpsc("ppsm --alpha -1 --out " + Dir("a")), 2);
  EXPECT_FALSE(fs::exists(Dir("a") + "/manifest.json"));
  EXPECT_EQ(Dpsc("ppsm --mechanism gauss --out " + Dir("b")), 2);
  EXPECT_EQ(Dpsc("ppsm --no-such-flag"), 2);
  EXPECT_EQ(Dpsc(""), 2);
  EXPECT_EQ(Dpsc("sweep --alpha 10,50 --out " + Dir("c")), 2);
}

TEST_F(CliTest, UnwritableOutputExitsTwo) {
  const std::string file = Dir("plain_file");
  WriteFile(file, "x");
  EXPECT_EQ(Dpsc("clear --out " + file + "/sub"), 2);
}

TEST_F(CliTest, PpsmManifestRecordsLaplaceScale) {
  const std::string out = Dir("ppsm");
  ASSERT_EQ(Dpsc("ppsm --alpha 10 --epsilon 1 --out " + out), 0) << Stderr();
  const json m = Manifest(out);
  EXPECT_DOUBLE_EQ(m["params"][0]["scale_mwh"].get<double>(), 240.0);
  EXPECT_EQ(m["config"]["seed"], 0);
  const json metrics = json::parse(ReadFile(out + "/metrics.json"));
  EXPECT_FALSE(metrics["ppsm"]["failed"].get<bool>());
  EXPECT_LT(metrics["ppsm"]["delta_omega_l_pct"].get<double>(),
            metrics["laplace"]["delta_omega_l_pct"].get<double>());
}

TEST_F(CliTest, ZeroNoiseReleasesTheTrueLoads) {
  const std::string out = Dir("zero");
  ASSERT_EQ(Dpsc("ppsm --zero-noise --seed 3 --out " + out), 0) << Stderr();
  const Eigen::MatrixXd d = SynthCase(3).loads.elec;
  const Eigen::MatrixXd d_hat = MatrixFromCsv(ReadFile(out + "/d_hat.csv"));
  ASSERT_EQ(d_hat.rows(), d.rows());
  ASSERT_EQ(d_hat.cols(), d.cols());
  EXPECT_LE((d_hat - d).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(CliTest, SeedDrivesTheRelease) {
  const std::string file =
      testing::TestDataPath("two_zone_case.json") + " --w 2";
  ASSERT_EQ(Dpsc("ppsm --case " + file +
                 " --seed 1 --mechanism laplace --out " + Dir("s1")),
            0)
      << Stderr();
  ASSERT_EQ(Dpsc("ppsm --case " + file +
                 " --seed 2 --mechanism laplace --out " + Dir("s2")),
            0)
      << Stderr();
  EXPECT_NE(ReadFile(Dir("s1") + "/d_tilde.csv"),
            ReadFile(Dir("s2") + "/d_tilde.csv"));
}

TEST_F(CliTest, SweepFourByTenEmitsEightyRows) {
  const std::string out = Dir("sweep");
  ASSERT_EQ(Dpsc("sweep --seeds 1 --eta-h 1.3,1.4,1.5,1.6 "
                 "--eta-e 1.1,1.2,1.3,1.4,1.5,1.6,1.7,1.8,1.9,2.0 --out " +
                 out),
            0)
      << Stderr();
  const std::string csv = ReadFile(out + "/sweep.csv");
  int rows = 0;
  size_t start = 0;
  while (start < csv.size()) {
    const size_t end = csv.find('\n', start);
    if (csv[start] != '#') ++rows;
    start = end + 1;
  }
  EXPECT_EQ(rows - 1, 80);
}

TEST_F(CliTest, ValidatePassesAndCatchesAnInjectedFault) {
  EXPECT_EQ(Dpsc("validate --out " + Dir("ok")), 0) << Stderr();
  EXPECT_THAT(ReadFile(Dir("ok") + "/validate.csv"),
              ::testing::Not(::testing::HasSubstr(",false,")));
  EXPECT_EQ(Dpsc("validate --inject-fault 1e-3 --out " + Dir("bad")), 1);
  EXPECT_THAT(ReadFile(Dir("bad") + "/validate.csv"),
              ::testing::HasSubstr(",false,"));
}

TEST_F(CliTest, ReplayClearIsByteIdentical) {
  ExpectReplayIdentical("clear --seed 5");
}

TEST_F(CliTest, ReplayPpsmIsByteIdentical) {
  ExpectReplayIdentical("ppsm --seed 5 --alpha 50");
}

TEST_F(CliTest, ReplayTable1IsByteIdentical) {
  ExpectReplayIdentical("table1 --seeds 2 --alpha 10,100");
}

TEST_F(CliTest, ReplaySweepIsByteIdentical) {
  ExpectReplayIdentical("sweep --seeds 1 --eta-h 1.3 --eta-e 1.1,2.0");
}

TEST_F(CliTest, ReplayBoundIsByteIdentical) {
  ExpectReplayIdentical("bound --seeds 30 --alpha 10");
}

TEST_F(CliTest, ReplayValidateIsByteIdentical) {
  ExpectReplayIdentical("validate --seed 9");
}

TEST_F(CliTest, SynthCaseRoundTripsThroughTheCli) {
  ASSERT_EQ(Dpsc("synth --seed 4 --out " + Dir("case")), 0) << Stderr();
  EXPECT_EQ(LoadCase(Dir("case") + "/case.json"), SynthCase(4));
  ASSERT_EQ(
      Dpsc("clear --case " + Dir("case") + "/case.json --out " + Dir("a")), 0);
  ASSERT_EQ(Dpsc("clear --seed 4 --out " + Dir("b")), 0);
  EXPECT_EQ(ReadFile(Dir("a") + "/leader.json"),
            ReadFile(Dir("b") + "/leader.json"));
}

}  // namespace
}  // namespace dpsc
