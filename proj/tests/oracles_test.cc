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

// The references themselves, checked against hand-worked instances.

#include "dpsc/oracles.h"

#include <vector>

#include <gtest/gtest.h>

#include "dpsc/common.h"
#include "dpsc/validation.h"
#include "test_util.h"

namespace dpsc {
namespace {

using testing::MeritOrderCase;

LpProblem Lp(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::VectorXd c,
             Eigen::VectorXd lo, Eigen::VectorXd hi) {
  LpProblem p;
  p.a = std::move(a);
  p.b = std::move(b);
  p.c = std::move(c);
  p.lo = std::move(lo);
  p.hi = std::move(hi);
  return p;
}

TEST(VertexOracleTest, SmallLpByHand) {
  // min -x - 2y, x + y + s = 4, x <= 3, y <= 2: y = 2, x = 2.
  const LpProblem p =
      Lp(Eigen::MatrixXd{{1.0, 1.0, 1.0}}, Eigen::VectorXd{{4.0}},
         Eigen::VectorXd{{-1.0, -2.0, 0.0}}, Eigen::VectorXd::Zero(3),
         Eigen::VectorXd{{3.0, 2.0, kInf}});
  const VertexOracleResult r = LpVertexOracle(p);
  ASSERT_EQ(r.status, OracleStatus::kOptimal);
  EXPECT_DOUBLE_EQ(r.obj, -6.0);
  EXPECT_DOUBLE_EQ(r.x[0], 2.0);
  EXPECT_DOUBLE_EQ(r.x[1], 2.0);
  EXPECT_DOUBLE_EQ(r.x[2], 0.0);
}

TEST(VertexOracleTest, InfeasibleAndUnbounded) {
  const LpProblem infeasible =
      Lp(Eigen::MatrixXd{{1.0, 1.0}}, Eigen::VectorXd{{10.0}},
         Eigen::VectorXd{{1.0, 1.0}}, Eigen::VectorXd::Zero(2),
         Eigen::VectorXd{{3.0, 3.0}});
  EXPECT_EQ(LpVertexOracle(infeasible).status, OracleStatus::kInfeasible);
  const LpProblem unbounded =
      Lp(Eigen::MatrixXd{{1.0, -1.0}}, Eigen::VectorXd{{1.0}},
         Eigen::VectorXd{{-1.0, 0.0}}, Eigen::VectorXd::Zero(2),
         Eigen::VectorXd{{kInf, kInf}});
  EXPECT_EQ(LpVertexOracle(unbounded).status, OracleStatus::kUnbounded);
}

TEST(VertexOracleTest, RefusesLargeProblems) {
  const int n = 11;
  const LpProblem p = Lp(Eigen::MatrixXd::Ones(1, n), Eigen::VectorXd{{1.0}},
                         Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n),
                         Eigen::VectorXd::Ones(n));
  EXPECT_THROW(LpVertexOracle(p), ValidationError);
}

TEST(MeritOrderTest, PriceIsTheMarginalOffer) {
  const Case c = MeritOrderCase(60);
  const std::vector<double> none(3, 0.0);
  MeritOrderResult r = MeritOrderClear(c.system, 0, ToWh(60), none, none);
  ASSERT_TRUE(r.feasible);
  EXPECT_DOUBLE_EQ(ToEurPerMWh(r.price), 10.0);
  EXPECT_DOUBLE_EQ(r.e[0], ToWh(60));
  EXPECT_NEAR(r.cost, 600.0, 1e-9);

  r = MeritOrderClear(c.system, 0, ToWh(100), none, none);
  ASSERT_TRUE(r.feasible);
  EXPECT_DOUBLE_EQ(ToEurPerMWh(r.price), 20.0);
  EXPECT_DOUBLE_EQ(r.e[0], ToWh(80));
  EXPECT_DOUBLE_EQ(r.e[1], ToWh(20));
  EXPECT_NEAR(r.cost, 1200.0, 1e-9);
}

TEST(MeritOrderTest, ShortfallShedsAtTheCap) {
  Case c = MeritOrderCase(200);
  const std::vector<double> none(3, 0.0);
  EXPECT_FALSE(MeritOrderClear(c.system, 0, ToWh(200), none, none).feasible);
  c.system.price_cap = ToEurPerWh(100);
  c.system.price_floor = ToEurPerWh(-10);
  const MeritOrderResult r =
      MeritOrderClear(c.system, 0, ToWh(200), none, none);
  ASSERT_TRUE(r.feasible);
  EXPECT_DOUBLE_EQ(ToEurPerMWh(r.price), 100.0);
  // 800 + 1000 for the offers and 70 MWh shed at the cap.
  EXPECT_NEAR(r.cost, 1800.0 + 7000.0, 1e-9);
}

// One zone: G1 80 MWh at 10, G2 200 MWh at 30, load 70 MWh. Heat: Q at
// 8 EUR/MWh and a COP 3 heat pump limited to 27 MWh, heat load 60 MWh.
Case HeatPumpToy() {
  Case c;
  EnergySystem& s = c.system;
  s.horizon = 1;
  s.elec_zones = {"Z"};
  s.heat_zones = {"H"};
  s.units.push_back(
      {"G1", ElecOnlyUnit{"Z", {0.0}, {ToWh(80)}, {ToEurPerWh(10)}}});
  s.units.push_back(
      {"G2", ElecOnlyUnit{"Z", {0.0}, {ToWh(200)}, {ToEurPerWh(30)}}});
  s.units.push_back(
      {"Q", HeatOnlyUnit{"H", {0.0}, {ToWh(200)}, {ToEurPerWh(8)}}});
  s.units.push_back(
      {"HP", HeatPumpUnit{"H", "Z", 3.0, {0.0}, {ToWh(27)}, {ToEurPerWh(0)}}});
  c.loads.elec = Eigen::MatrixXd::Constant(1, 1, ToWh(70));
  c.loads.heat = Eigen::MatrixXd::Constant(1, 1, ToWh(60));
  return c;
}

TEST(BilevelOracleTest, HeatPumpToyByHand) {
  // The pump adds at most 9 MWh of load, so the price stays at 10 and each
  // MWh of pumped heat costs 10/3 < 8: run it flat out.
  const Case c = HeatPumpToy();
  OracleConfig cfg;
  cfg.grid_step = ToWh(1);
  const BilevelOracleResult r = BilevelGridOracle(c.system, c.loads, 0, cfg);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(ToMWh(r.h[3]), 27.0, 1e-9);
  EXPECT_NEAR(ToMWh(r.h[2]), 33.0, 1e-9);
  EXPECT_DOUBLE_EQ(ToEurPerMWh(r.price), 10.0);
  EXPECT_NEAR(r.objective, 8.0 * 33.0 + 10.0 / 3.0 * 27.0, 1e-9);
  EXPECT_EQ(r.evaluations, 28);
}

TEST(BilevelOracleTest, RejectsNonPositiveStep) {
  const Case c = HeatPumpToy();
  EXPECT_THROW(BilevelGridOracle(c.system, c.loads, 0, OracleConfig{}),
               ValidationError);
}

TEST(LeaderCostTest, ChpRevenueOffsetsHeatCost) {
  EnergySystem s;
  s.horizon = 1;
  s.elec_zones = {"Z"};
  s.heat_zones = {"H"};
  ChpUnit chp;
  chp.heat_zone = "H";
  chp.elec_zone = "Z";
  chp.h_min = {0.0};
  chp.h_max = {ToWh(100)};
  chp.heat_cost = {ToEurPerWh(12)};
  chp.elec_cost = {ToEurPerWh(5)};
  s.units.push_back({"C", chp});
  // 12 * 40 - (25 - 5) * 30.
  EXPECT_NEAR(LeaderCostAt(s, 0, {ToWh(40)}, ToEurPerWh(25), {ToWh(30)}),
              480.0 - 600.0, 1e-9);
}

TEST(FidelityOracleTest, CostBandOnTheMeritOrderCase) {
  // Price 10 below 80 MWh; cost 10 D. Cost band 600 +- 60 allows
  // D in [54, 66].
  const Case c = MeritOrderCase(60);
  const std::vector<double> none(3, 0.0);
  OracleConfig cfg;
  cfg.grid_step = ToWh(0.5);
  const auto at = [&](double d_tilde_mwh) {
    return FidelityGridOracle(c.system, 0, ToWh(d_tilde_mwh), none, none, 600.0,
                              ToEurPerWh(10), 60.0, ToEurPerWh(0.15), ToWh(200),
                              cfg);
  };
  FidelityOracleResult r = at(75);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(ToMWh(r.d_hat), 66.0, 1e-9);
  EXPECT_NEAR(r.cost, 660.0, 1e-9);
  r = at(61.5);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(ToMWh(r.d_hat), 61.5, 1e-9);
  EXPECT_NEAR(r.distance, 0.0, 1e-6);
  r = at(-20);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(ToMWh(r.d_hat), 54.0, 1e-9);
}

TEST(FidelityOracleTest, EmptyPriceBand) {
  const Case c = MeritOrderCase(60);
  const std::vector<double> none(3, 0.0);
  OracleConfig cfg;
  cfg.grid_step = ToWh(0.5);
  const FidelityOracleResult r = FidelityGridOracle(
      c.system, 0, ToWh(60), none, none, 600.0, ToEurPerWh(15), 60.0,
      ToEurPerWh(0.15), ToWh(200), cfg);
  EXPECT_FALSE(r.feasible);
}

TEST(ValidationTest, SuitesPassAndAFaultFailsEveryComparison) {
  ValidationOptions opt;
  opt.seed = 4;
  opt.lp_instances = 30;
  opt.leader_instances = 4;
  opt.fidelity_instances = 4;
  const std::vector<ValidationCheck> ok = RunValidation(opt);
  EXPECT_EQ(ok.size(), 38u);
  EXPECT_TRUE(AllPassed(ok)) << ValidationCsv(ok);
  opt.fault = 1.0;
  for (const ValidationCheck& c : RunValidation(opt)) {
    EXPECT_FALSE(c.passed) << c.suite << " " << c.instance;
  }
}

TEST(ValidationTest, CsvReplacesCommasInDetails) {
  std::vector<ValidationCheck> checks(2);
  checks[0] = {"lp", 0, true, 0.0, 1e-8, "n=2, m=1"};
  checks[1] = {"leader", 3, false, 2.5, 1.0, "x"};
  EXPECT_EQ(ValidationCsv(checks),
            "suite,instance,passed,error,tolerance,detail\n"
            "lp,0,true,0,1e-08,n=2; m=1\n"
            "leader,3,false,2.5,1,x\n");
}

}  // namespace
}  // namespace dpsc
