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

#include "dpsc/markets.h"

#include <random>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "dpsc/case_io.h"
#include "dpsc/common.h"
#include "dpsc/oracles.h"
#include "test_util.h"

namespace dpsc {
namespace {

using ::testing::HasSubstr;
using testing::MeritOrderCase;
using testing::RandomToyCase;
using testing::TestDataPath;

CouplingBounds ZeroBounds(const EnergySystem& sys) {
  const int nu = static_cast<int>(sys.units.size());
  return {Eigen::MatrixXd::Zero(nu, sys.horizon),
          Eigen::MatrixXd::Zero(nu, sys.horizon)};
}

// Hour `t` of a case as a standalone one-hour case.
Case SliceHour(const Case& c, int t) {
  Case out = c;
  auto cut = [t](Series& s) { s = Series{s[t]}; };
  out.system.horizon = 1;
  for (Unit& u : out.system.units) {
    std::visit(
        [&](auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ElecOnlyUnit>) {
            cut(k.e_min);
            cut(k.e_max);
            cut(k.elec_cost);
          } else if constexpr (std::is_same_v<K, HeatOnlyUnit>) {
            cut(k.h_min);
            cut(k.h_max);
            cut(k.heat_cost);
          } else if constexpr (std::is_same_v<K, ChpUnit>) {
            cut(k.h_min);
            cut(k.h_max);
            cut(k.heat_cost);
            cut(k.elec_cost);
          } else {
            cut(k.h_min);
            cut(k.h_max);
            cut(k.elec_cost);
          }
        },
        u.kind);
  }
  for (TransmissionLine& l : out.system.lines) {
    cut(l.tc_min);
    cut(l.tc_max);
  }
  out.system.forecast.reset();
  out.loads.elec = c.loads.elec.col(t);
  out.loads.heat = c.loads.heat.col(t);
  return out;
}

// Objective of the one-zone clear by vertex enumeration on a hand-built LP.
double OracleMeritCost(double load_mwh) {
  LpProblem p;
  p.c = Eigen::Vector2d(10.0, 20.0);
  p.a = Eigen::MatrixXd::Ones(1, 2);
  p.b = Eigen::VectorXd::Constant(1, load_mwh);
  p.lo = Eigen::Vector2d::Zero();
  p.hi = Eigen::Vector2d(80.0, 50.0);
  return LpVertexOracle(p).obj;
}

TEST(ClearFollowerTest, MeritOrderMatchesOracle) {
  const Case c = MeritOrderCase(100.0);
  const FollowerOutcome out =
      ClearFollower(c.system, c.loads.elec, ZeroBounds(c.system));
  EXPECT_NEAR(ToMWh(out.e(0, 0)), 80.0, 1e-9);
  EXPECT_NEAR(ToMWh(out.e(1, 0)), 20.0, 1e-9);
  EXPECT_NEAR(out.cost, OracleMeritCost(100.0), 1e-8);
  EXPECT_NEAR(out.cost, 1200.0, 1e-8);
  // The price is the marginal cost of one more MWh.
  EXPECT_NEAR(ToEurPerMWh(out.lambda(0, 0)),
              OracleMeritCost(101.0) - OracleMeritCost(100.0), 1e-8);
}

TEST(ClearFollowerTest, HeatPumpBoundsActAsLoad) {
  Case c = MeritOrderCase(70.0);
  HeatPumpUnit hp;
  hp.heat_zone = "H";
  hp.elec_zone = "Z";
  hp.cop = 3.0;
  hp.h_min = {0.0};
  hp.h_max = {ToWh(60.0)};
  hp.elec_cost = {0.0};
  c.system.units.push_back({"HP", hp});
  CouplingBounds b = ZeroBounds(c.system);
  b.e_min(3, 0) = b.e_max(3, 0) = ToWh(-10.0);
  const FollowerOutcome out = ClearFollower(c.system, c.loads.elec, b);
  EXPECT_NEAR(ToMWh(out.e(3, 0)), -10.0, 1e-9);
  EXPECT_NEAR(ToMWh(out.e(0, 0) + out.e(1, 0)), 80.0, 1e-9);
  EXPECT_NEAR(ToEurPerMWh(out.lambda(0, 0)), 10.0, 1e-9);
}

TEST(ClearFollowerTest, CongestionSeparatesZonePrices) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  const FollowerOutcome out =
      ClearFollower(c.system, c.loads.elec, ZeroBounds(c.system));
  // Independent oracle on hour 0: Cheap, Dear, Wind and the line.
  auto oracle = [](double south) {
    LpProblem p;
    p.c = Eigen::Vector4d(10.0, 40.0, 0.0, 0.0);
    p.a = Eigen::MatrixXd::Zero(2, 4);
    p.a.row(0) << 1.0, 0.0, 0.0, -1.0;
    p.a.row(1) << 0.0, 1.0, 1.0, 1.0;
    p.b = Eigen::Vector2d(0.0, south);
    p.lo = Eigen::Vector4d(0.0, 0.0, 0.0, -5.0);
    p.hi = Eigen::Vector4d(100.0, 100.0, 3.0, 5.0);
    return LpVertexOracle(p);
  };
  const VertexOracleResult ref = oracle(30.0);
  EXPECT_NEAR(out.hourly_cost[0], ref.obj, 1e-8);
  EXPECT_NEAR(ToMWh(out.f(0, 0)), 5.0, 1e-9);
  EXPECT_NEAR(ToEurPerMWh(out.lambda(0, 0)), 10.0, 1e-9);
  EXPECT_NEAR(ToEurPerMWh(out.lambda(1, 0)), oracle(31.0).obj - ref.obj, 1e-8);
  EXPECT_GT(out.lambda(1, 0), out.lambda(0, 0));
  for (int t = 0; t < 2; ++t) {
    for (int z = 0; z < 2; ++z) {
      double net = 0.0;
      for (size_t j = 0; j < c.system.units.size(); ++j) {
        if (c.system.units[j].is_heat_only()) continue;
        if (c.system.ElecZoneIndex(std::visit(
                [](const auto& k) -> std::string {
                  if constexpr (requires { k.elec_zone; }) {
                    return k.elec_zone;
                  } else {
                    return "";
                  }
                },
                c.system.units[j].kind)) == z) {
          net += out.e(j, t);
        }
      }
      net += (z == 1 ? 1.0 : -1.0) * out.f(0, t);
      net += out.shed(z, t) + out.spill(z, t);
      EXPECT_NEAR(net, c.loads.elec(z, t), 1e-3);
    }
  }
}

TEST(ClearFollowerTest, InfeasibleHourNamesZone) {
  Case c = MeritOrderCase(200.0);
  try {
    ClearFollower(c.system, c.loads.elec, ZeroBounds(c.system));
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_THAT(e.what(), HasSubstr("zone Z"));
    EXPECT_THAT(e.what(), HasSubstr("hour 0"));
  }
}

TEST(ClearFollowerTest, PriceLimitsShedAtCap) {
  Case c = MeritOrderCase(200.0);
  c.system.price_cap = ToEurPerWh(150.0);
  c.system.price_floor = ToEurPerWh(-10.0);
  const FollowerOutcome out =
      ClearFollower(c.system, c.loads.elec, ZeroBounds(c.system));
  EXPECT_NEAR(ToMWh(out.shed(0, 0)), 70.0, 1e-9);
  EXPECT_NEAR(ToEurPerMWh(out.lambda(0, 0)), 150.0, 1e-9);
  EXPECT_NEAR(out.cost, 800.0 + 1000.0 + 70.0 * 150.0, 1e-6);
}

TEST(ClearFollowerTest, HoursDecomposeExactly) {
  const Case c = SynthCase(7);
  const LeaderOutcome lead = [&] {
    LeaderOptions opt;
    opt.k_bits = 3;
    return SolveLeaderBilevel(c.system, c.loads, opt);
  }();
  const FollowerOutcome day =
      ClearFollower(c.system, c.loads.elec, lead.bounds);
  for (int t : {0, 7, 19}) {
    const Case one = SliceHour(c, t);
    CouplingBounds b{lead.bounds.e_min.col(t), lead.bounds.e_max.col(t)};
    const FollowerOutcome hour = ClearFollower(one.system, one.loads.elec, b);
    EXPECT_EQ(hour.hourly_cost[0], day.hourly_cost[t]);
    EXPECT_TRUE(hour.lambda.col(0) == day.lambda.col(t));
    EXPECT_TRUE(hour.e.col(0) == day.e.col(t));
  }
}

TEST(LeaderTest, NoCouplingReducesToHeatMeritOrder) {
  const Case c = MeritOrderCase(100.0);
  Case with_heat = c;
  with_heat.system.units.push_back(
      {"Q2", HeatOnlyUnit{"H", {0.0}, {ToWh(100)}, {ToEurPerWh(12)}}});
  with_heat.loads.heat(0, 0) = ToWh(150.0);
  const LeaderOutcome out =
      SolveLeaderBilevel(with_heat.system, with_heat.loads);
  // Q2 at 12 fills first, Q at 30 takes the remaining 50 MWh.
  EXPECT_NEAR(out.cost, 100.0 * 12.0 + 50.0 * 30.0, 1e-6);
  EXPECT_NEAR(out.milp_cost, out.cost, 1e-6);
  EXPECT_EQ(out.discretization_gap, 0.0);
  EXPECT_NEAR(out.follower.cost, 1200.0, 1e-6);
}

TEST(LeaderTest, HeatInfeasibilityIsReported) {
  Case c = MeritOrderCase(100.0);
  c.loads.heat(0, 0) = ToWh(500.0);
  EXPECT_THROW(SolveLeaderBilevel(c.system, c.loads), InfeasibleError);
}

double OracleTolerance(const LeaderOutcome& out, const LeaderOptions& opt) {
  return out.discretization_gap +
         opt.mip_gap * std::max(1.0, std::abs(out.cost)) +
         1e-6 * (1.0 + std::abs(out.cost));
}

TEST(LeaderTest, ToysMatchGridOracle) {
  LeaderOptions opt;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Case c = RandomToyCase(seed, seed % 2 == 0);
    const LeaderOutcome out = SolveLeaderBilevel(c.system, c.loads, opt);
    double span = 0.0;
    for (const Unit& u : c.system.units) {
      if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        span = chp->h_max[0] - chp->h_min[0];
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        span = hp->h_max[0] - hp->h_min[0];
      }
    }
    OracleConfig cfg;
    cfg.grid_step = 0.1 * span / std::ldexp(1.0, opt.k_bits);
    const BilevelOracleResult ref =
        BilevelGridOracle(c.system, c.loads, 0, cfg);
    ASSERT_TRUE(ref.feasible) << seed;
    EXPECT_NEAR(out.cost, ref.objective, OracleTolerance(out, opt))
        << "seed " << seed;
  }
}

TEST(LeaderTest, RefinementIsMonotone) {
  // The 2K-bit grid contains the K-bit grid, so the optimum cannot worsen.
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const Case c = RandomToyCase(seed, seed % 2 == 0);
    LeaderOptions coarse;
    coarse.k_bits = 3;
    LeaderOptions fine;
    fine.k_bits = 6;
    const double a = SolveLeaderBilevel(c.system, c.loads, coarse).cost;
    const double b = SolveLeaderBilevel(c.system, c.loads, fine).cost;
    EXPECT_LE(b, a + 1e-6 * (1.0 + std::abs(a))) << seed;
  }
}

TEST(LeaderTest, BoundsFollowHeatExactly) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  const LeaderOutcome out = SolveLeaderBilevel(c.system, c.loads);
  for (size_t j = 0; j < c.system.units.size(); ++j) {
    for (int t = 0; t < c.system.horizon; ++t) {
      const double h = out.h(j, t);
      if (const auto* chp = std::get_if<ChpUnit>(&c.system.units[j].kind)) {
        EXPECT_NEAR(out.bounds.e_min(j, t), h / chp->r, 1e-9 * (1.0 + h));
        EXPECT_NEAR(out.bounds.e_max(j, t),
                    (chp->fuel_max - chp->rho_h * h) / chp->rho_e,
                    1e-9 * chp->fuel_max);
      } else if (const auto* hp =
                     std::get_if<HeatPumpUnit>(&c.system.units[j].kind)) {
        EXPECT_NEAR(out.bounds.e_min(j, t), -h / hp->cop, 1e-9 * (1.0 + h));
        EXPECT_EQ(out.bounds.e_min(j, t), out.bounds.e_max(j, t));
      }
    }
  }
  for (int t = 0; t < c.system.horizon; ++t) {
    EXPECT_NEAR(out.h.col(t).sum(), c.loads.heat(0, t), 1e-3);
  }
}

TEST(LeaderTest, BeatsRandomHeuristicDispatch) {
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    const Case c = RandomToyCase(seed, seed % 2 == 1);
    LeaderOptions opt;
    const LeaderOutcome out = SolveLeaderBilevel(c.system, c.loads, opt);
    const double tol = OracleTolerance(out, opt);
    EXPECT_NEAR(out.milp_cost, out.cost, tol) << seed;
    std::mt19937_64 rng(seed);
    int tried = 0;
    for (int draw = 0; draw < 100; ++draw) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(c.system.units.size(), 1);
      double need = c.loads.heat(0, 0);
      int coupling = -1;
      for (size_t j = 0; j < c.system.units.size(); ++j) {
        const Unit& u = c.system.units[j];
        double hi = 0.0;
        if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) hi = chp->h_max[0];
        if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind))
          hi = hp->h_max[0];
        if (u.is_coupling()) {
          coupling = static_cast<int>(j);
          h(j, 0) = std::uniform_real_distribution<double>(0.0, hi)(rng);
          need -= h(j, 0);
        }
      }
      ASSERT_GE(coupling, 0);
      // Heat-only units Q1 (index 3) and Q2 (index 4) in merit order.
      const auto& q1 = std::get<HeatOnlyUnit>(c.system.units[3].kind);
      const auto& q2 = std::get<HeatOnlyUnit>(c.system.units[4].kind);
      const bool q1_first = q1.heat_cost[0] <= q2.heat_cost[0];
      const int first = q1_first ? 3 : 4;
      const int second = q1_first ? 4 : 3;
      const double cap_first =
          std::get<HeatOnlyUnit>(c.system.units[first].kind).h_max[0];
      const double cap_second =
          std::get<HeatOnlyUnit>(c.system.units[second].kind).h_max[0];
      if (need < 0.0 || need > cap_first + cap_second) continue;
      h(first, 0) = std::min(need, cap_first);
      h(second, 0) = need - h(first, 0);
      const CouplingBounds b = CouplingBoundsFor(c.system, h);
      FollowerOutcome f;
      try {
        f = ClearFollower(c.system, c.loads.elec, b);
      } catch (const InfeasibleError&) {
        continue;
      }
      ++tried;
      const double cost = LeaderHourlyCost(c.system, h, f)[0];
      EXPECT_LE(out.cost, cost + tol) << seed << " draw " << draw;
    }
    EXPECT_GT(tried, 10);
  }
}

LeaderOptions Enumerating() {
  LeaderOptions opt;
  opt.method = LeaderMethod::kPriceEnumeration;
  return opt;
}

TEST(PriceEnumerationTest, ToysBracketedByGridSolutions) {
  // Exact optimum: never above a grid point, never below the grid optimum
  // minus its discretization gap.
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Case c = RandomToyCase(seed, seed % 2 == 0);
    LeaderOptions grid;
    const LeaderOutcome milp = SolveLeaderBilevel(c.system, c.loads, grid);
    const LeaderOutcome exact =
        SolveLeaderBilevel(c.system, c.loads, Enumerating());
    EXPECT_EQ(exact.discretization_gap, 0.0);
    EXPECT_NEAR(exact.milp_cost, exact.cost,
                1e-6 * (1.0 + std::abs(exact.cost)));
    const double eps = 1e-6 * (1.0 + std::abs(milp.cost));
    EXPECT_LE(exact.cost, milp.cost + eps) << seed;
    EXPECT_GE(exact.cost, milp.cost - OracleTolerance(milp, grid)) << seed;

    double span = 0.0;
    for (const Unit& u : c.system.units) {
      if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        span = chp->h_max[0] - chp->h_min[0];
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        span = hp->h_max[0] - hp->h_min[0];
      }
    }
    OracleConfig cfg;
    cfg.grid_step = 0.1 * span / 256.0;
    const BilevelOracleResult ref =
        BilevelGridOracle(c.system, c.loads, 0, cfg);
    ASSERT_TRUE(ref.feasible);
    EXPECT_LE(exact.cost, ref.objective + eps) << seed;
  }
}

TEST(PriceEnumerationTest, SynthDayAgreesWithBinaryExpansion) {
  const Case c = SynthCase(3);
  LeaderOptions grid;
  grid.k_bits = 4;
  const LeaderOutcome milp = SolveLeaderBilevel(c.system, c.loads, grid);
  const LeaderOutcome exact =
      SolveLeaderBilevel(c.system, c.loads, Enumerating());
  const double eps = 1e-6 * (1.0 + std::abs(milp.cost));
  EXPECT_LE(exact.cost, milp.cost + eps);
  EXPECT_GE(exact.cost, milp.cost - OracleTolerance(milp, grid));
  for (int t = 0; t < c.system.horizon; ++t) {
    EXPECT_LE(exact.hourly_cost[t], milp.hourly_cost[t] + eps) << "hour " << t;
  }
}

TEST(PriceEnumerationTest, FallsBackToBinaryExpansion) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  LeaderOptions opt = Enumerating();
  opt.max_price_vectors = 1;
  const LeaderOutcome fallback = SolveLeaderBilevel(c.system, c.loads, opt);
  const LeaderOutcome grid = SolveLeaderBilevel(c.system, c.loads);
  EXPECT_TRUE(fallback.h == grid.h);
  EXPECT_EQ(fallback.discretization_gap, grid.discretization_gap);
  EXPECT_GT(grid.discretization_gap, 0.0);
}

TEST(DecoupledHeatTest, ZeroPricesGiveHeatMeritOrder) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  const DecoupledHeat out = SolveDecoupledHeat(c.system, c.loads.heat, zero);
  // HP heat is free at price 0 and CHP (8) beats the boiler (30); CHP
  // electricity has no value, so it sits at e_min = h / R.
  EXPECT_NEAR(ToMWh(out.h(5, 0)), 30.0, 1e-9);
  EXPECT_NEAR(ToMWh(out.h(4, 0)), 20.0, 1e-9);
  EXPECT_NEAR(ToMWh(out.h(3, 0)), 0.0, 1e-9);
  EXPECT_NEAR(ToMWh(out.e(4, 0)), 10.0, 1e-9);
  EXPECT_NEAR(ToMWh(out.bounds.e_min(5, 0)), -10.0, 1e-9);
  // Oracle: same LP by vertex enumeration over (h_boiler, h_chp, e_chp,
  // h_hp) and two slacks.
  LpProblem p;
  p.c.resize(6);
  p.c << 30, 8, 20, 0, 0, 0;
  p.a = Eigen::MatrixXd::Zero(3, 6);
  p.a.row(0) << 1, 1, 0, 1, 0, 0;
  p.a.row(1) << 0, -0.5, 1, 0, -1, 0;  // e - h/R - s1 = 0, s1 >= 0
  p.a.row(2) << 0, 0.2, 1, 0, 0, 1;    // e + 0.2 h + s2 = 60, s2 >= 0
  p.b = Eigen::Vector3d(50.0, 0.0, 60.0);
  p.lo = Eigen::VectorXd::Zero(6);
  p.hi.resize(6);
  p.hi << 100, 40, 60, 30, kInf, kInf;
  const VertexOracleResult ref = LpVertexOracle(p);
  double hour0 = 0.0;
  hour0 += 30.0 * ToMWh(out.h(3, 0)) + 8.0 * ToMWh(out.h(4, 0)) +
           20.0 * ToMWh(out.e(4, 0));
  EXPECT_NEAR(hour0, ref.obj, 1e-8);
}

TEST(DecoupledHeatTest, HighPricesMaximizeChpElectricity) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  const Eigen::MatrixXd high =
      Eigen::MatrixXd::Constant(2, 2, ToEurPerWh(1000.0));
  const DecoupledHeat out = SolveDecoupledHeat(c.system, c.loads.heat, high);
  for (int t = 0; t < 2; ++t) {
    // e sits at e_max(h) and h trades heat against fuel: with a price of
    // 1000 the revenue loss 0.2 * 1000 per MWh of heat dominates.
    EXPECT_NEAR(out.e(4, t), out.bounds.e_max(4, t), 1e-3);
    EXPECT_NEAR(ToMWh(out.h(5, t)), 0.0, 1e-9);  // HP too expensive
  }
  EXPECT_NEAR(ToMWh(out.h(4, 0)), 0.0, 1e-9);
}

TEST(DecoupledHeatTest, NoCouplingIgnoresPrices) {
  const Case c = MeritOrderCase(100.0);
  Case heat = c;
  heat.loads.heat(0, 0) = ToWh(40.0);
  const DecoupledHeat a = SolveDecoupledHeat(
      heat.system, heat.loads.heat, Eigen::MatrixXd::Constant(1, 1, 0.0));
  const DecoupledHeat b = SolveDecoupledHeat(
      heat.system, heat.loads.heat, Eigen::MatrixXd::Constant(1, 1, 1.0));
  EXPECT_TRUE(a.h == b.h);
  EXPECT_EQ(a.cost, b.cost);
}

TEST(PredictTest, NoCouplingConvergesAfterOneIteration) {
  const Case c = MeritOrderCase(100.0);
  const PricePrediction p =
      PredictLeaderPrices(c.system, c.loads.heat, c.loads.elec);
  const FollowerOutcome clear =
      ClearFollower(c.system, c.loads.elec, ZeroBounds(c.system));
  EXPECT_TRUE(p.lambda == clear.lambda);
  EXPECT_TRUE(p.converged);
  EXPECT_EQ(p.last_change, 0.0);
}

TEST(PredictTest, SingleIterationIsOnePass) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  PredictOptions opt;
  opt.iter_max = 1;
  const PricePrediction p =
      PredictLeaderPrices(c.system, c.loads.heat, c.loads.elec, opt);
  const DecoupledHeat base = SolveBaselineHeat(c.system, c.loads.heat);
  const Eigen::MatrixXd lambda =
      ClearFollower(c.system, c.loads.elec, base.bounds).lambda;
  EXPECT_TRUE(p.lambda == lambda);
  EXPECT_TRUE(p.bounds ==
              SolveDecoupledHeat(c.system, c.loads.heat, lambda).bounds);
  EXPECT_EQ(p.iterations, 1);
  EXPECT_FALSE(p.converged);
}

TEST(PredictTest, ChpToyReachesFixedPoint) {
  const Case c = RandomToyCase(3, true);
  PredictOptions opt;
  opt.iter_max = 10;
  const PricePrediction p =
      PredictLeaderPrices(c.system, c.loads.heat, c.loads.elec, opt);
  EXPECT_TRUE(p.converged);
  // Stationarity: one more pass reproduces the prices.
  const Eigen::MatrixXd again =
      ClearFollower(c.system, c.loads.elec, p.bounds).lambda;
  EXPECT_LT((again - p.lambda).cwiseAbs().maxCoeff(), ToEurPerWh(1e-9));
}

TEST(PredictTest, FollowerPredictionMatchesTrueClearWithoutNoise) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  const LeaderOutcome lead = SolveLeaderBilevel(c.system, c.loads);
  const FollowerPrediction p =
      PredictFollower(c.system, c.loads.elec, lead.bounds);
  EXPECT_EQ(p.cost, lead.follower.cost);
  EXPECT_TRUE(p.lambda == lead.follower.lambda);
}

TEST(PredictTest, NonBindingPerturbationKeepsPrices) {
  const Case c = MeritOrderCase(100.0);
  Eigen::MatrixXd d = c.loads.elec;
  d(0, 0) += ToWh(0.5);  // B stays marginal
  const FollowerPrediction a =
      PredictFollower(c.system, c.loads.elec, ZeroBounds(c.system));
  const FollowerPrediction b =
      PredictFollower(c.system, d, ZeroBounds(c.system));
  EXPECT_TRUE(a.lambda == b.lambda);
  EXPECT_NEAR(b.cost - a.cost, 0.5 * 20.0, 1e-9);
}

TEST(PredictTest, InfeasiblePredictionThrows) {
  const Case c = MeritOrderCase(100.0);
  const Eigen::MatrixXd d = Eigen::MatrixXd::Constant(1, 1, ToWh(500.0));
  EXPECT_THROW(PredictFollower(c.system, d, ZeroBounds(c.system)),
               InfeasibleError);
}

}  // namespace
}  // namespace dpsc
