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

#include "dpsc/branchbound.h"

#include <random>

#include <gtest/gtest.h>

#include "dpsc/common.h"
#include "dpsc/lp.h"
#include "test_util.h"

namespace dpsc {
namespace {

// Brute force over all 0/1 assignments, each completed by an LP or QP solve.
struct Enumerated {
  bool feasible = false;
  double obj = kInf;
};

Enumerated Enumerate(const MipProblem& p) {
  Enumerated best;
  const int nb = static_cast<int>(p.binaries.size());
  for (int mask = 0; mask < (1 << nb); ++mask) {
    Eigen::VectorXd lo = p.base.lo;
    Eigen::VectorXd hi = p.base.hi;
    bool ok = true;
    for (int k = 0; k < nb; ++k) {
      const double v = (mask >> k) & 1;
      const int j = p.binaries[k];
      if (v < lo[j] || v > hi[j]) ok = false;
      lo[j] = hi[j] = v;
    }
    if (!ok) continue;
    double obj;
    if (p.quad) {
      QpSolver qp(p.base, *p.quad);
      const QpSolution s = qp.Solve(lo, hi);
      if (!s.optimal()) continue;
      obj = s.obj;
    } else {
      LpProblem fixed = p.base;
      fixed.lo = lo;
      fixed.hi = hi;
      const LpSolution s = SolveLp(fixed);
      if (s.status != LpStatus::kOptimal) continue;
      obj = s.obj;
    }
    if (obj < best.obj) {
      best.obj = obj;
      best.feasible = true;
    }
  }
  return best;
}

MipProblem Knapsack() {
  // max 10a + 13b + 7c + 8d + 4e + 9f  s.t. 3a + 4b + 2c + 3d + 1e + 3f <= 9.
  LpBuilder b;
  const double value[] = {10, 13, 7, 8, 4, 9};
  const double weight[] = {3, 4, 2, 3, 1, 3};
  LpBuilder::Terms row;
  for (int i = 0; i < 6; ++i) {
    b.AddVar(0.0, 1.0, -value[i]);
    row.emplace_back(i, weight[i]);
  }
  b.AddRow(row, LpBuilder::Sense::kLe, 9.0);
  MipProblem p;
  p.base = b.Build();
  p.binaries = {0, 1, 2, 3, 4, 5};
  return p;
}

TEST(QpTest, ClippedProjection) {
  // min (x - 3)^2 on [0, 2].
  LpProblem base;
  base.c = Eigen::VectorXd::Zero(1);
  base.a = Eigen::MatrixXd::Zero(0, 1);
  base.b = Eigen::VectorXd::Zero(0);
  base.lo = Eigen::VectorXd::Constant(1, 0.0);
  base.hi = Eigen::VectorXd::Constant(1, 2.0);
  QuadraticTerm q{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 3.0)};
  const QpSolution s = SolveQpNode(base, q);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.x[0], 2.0, 1e-12);
  EXPECT_NEAR(s.obj, 1.0, 1e-12);
  EXPECT_NEAR(s.mu_upper[0], 2.0, 1e-9);
  EXPECT_LE(QpStationarityResidual(base, q, s), 1e-9);
}

TEST(QpTest, ForcedPoint) {
  LpBuilder b;
  b.AddVar(0.0, 10.0);
  b.AddVar(0.0, 10.0);
  b.AddRow({{0, 1.0}, {1, 1.0}}, LpBuilder::Sense::kEq, 4.0);
  b.AddRow({{0, 1.0}, {1, -1.0}}, LpBuilder::Sense::kEq, 2.0);
  const LpProblem base = b.Build();
  QuadraticTerm q{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Constant(2, 7.0)};
  const QpSolution s = SolveQpNode(base, q);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.x[0], 3.0, 1e-10);
  EXPECT_NEAR(s.x[1], 1.0, 1e-10);
}

TEST(QpTest, ClosedFormSumConstraint) {
  // min sum q_i (x_i - c_i)^2 s.t. sum x = s, no active bounds:
  // x_i = c_i + (s - sum c) / (q_i * sum 1/q).
  const Eigen::Vector4d qv(1.0, 2.0, 0.5, 4.0);
  const Eigen::Vector4d c(1.0, -2.0, 3.0, 0.5);
  const double total = 10.0;
  LpBuilder b;
  LpBuilder::Terms row;
  for (int i = 0; i < 4; ++i) {
    b.AddVar(-100.0, 100.0);
    row.emplace_back(i, 1.0);
  }
  b.AddRow(row, LpBuilder::Sense::kEq, total);
  const LpProblem base = b.Build();
  QuadraticTerm q{qv, c};
  const QpSolution s = SolveQpNode(base, q);
  ASSERT_TRUE(s.optimal());
  const double inv_sum = (1.0 / qv.array()).sum();
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(s.x[i], c[i] + (total - c.sum()) / (qv[i] * inv_sum), 1e-9);
  }
  EXPECT_LE(QpStationarityResidual(base, q, s), 1e-7);
}

TEST(QpTest, InfeasibleAndUnbounded) {
  LpBuilder b;
  b.AddVar(0.0, 1.0);
  b.AddRow({{0, 1.0}}, LpBuilder::Sense::kEq, 2.0);
  const LpProblem infeasible = b.Build();
  QuadraticTerm q{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};
  EXPECT_EQ(SolveQpNode(infeasible, q).status, LpStatus::kInfeasible);

  LpBuilder u;
  u.AddVar(-kInf, kInf, -1.0);
  u.AddVar(-kInf, kInf, 0.0);
  const LpProblem ray = u.Build();
  QuadraticTerm flat{Eigen::Vector2d(0.0, 1.0), Eigen::VectorXd::Zero(2)};
  EXPECT_EQ(SolveQpNode(ray, flat).status, LpStatus::kUnbounded);
}

TEST(QpTest, RandomInstancesSatisfyStationarity) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const LpProblem base = testing::RandomLp(rng, 6, 3, false);
    QuadraticTerm q{Eigen::VectorXd(6), Eigen::VectorXd(6)};
    for (int j = 0; j < 6; ++j) {
      q.q[j] = trial % 3 == 0 && j % 2 ? 0.0 : u(rng);
      q.center[j] = 4.0 * u(rng) - 4.0;
    }
    const QpSolution s = SolveQpNode(base, q);
    if (!s.optimal()) continue;
    ++solved;
    EXPECT_LE(QpStationarityResidual(base, q, s), 1e-7) << trial;
    const Eigen::VectorXd r = base.a * s.x - base.b;
    EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-7) << trial;
    for (int j = 0; j < 6; ++j) {
      EXPECT_GE(s.x[j], base.lo[j] - 1e-9);
      EXPECT_LE(s.x[j], base.hi[j] + 1e-9);
      EXPECT_GE(s.mu_lower[j], 0.0);
      EXPECT_GE(s.mu_upper[j], 0.0);
    }
  }
  EXPECT_GT(solved, 50);
}

TEST(MipTest, IntegralRootSolvesInOneNode) {
  LpBuilder b;
  b.AddVar(0.0, 1.0, -1.0);
  b.AddVar(0.0, 1.0, 2.0);
  b.AddVar(0.0, 5.0, 1.0);
  b.AddRow({{0, 1.0}, {2, 1.0}}, LpBuilder::Sense::kGe, 3.0);
  MipProblem p;
  p.base = b.Build();
  p.binaries = {0, 1};
  const MipSolution s = SolveMip(p);
  ASSERT_EQ(s.status, MipStatus::kOptimal);
  EXPECT_EQ(s.nodes, 1);
  EXPECT_NEAR(s.obj, 1.0, 1e-9);
}

TEST(MipTest, KnapsackMatchesEnumeration) {
  const MipProblem p = Knapsack();
  const MipSolution s = SolveMip(p);
  ASSERT_EQ(s.status, MipStatus::kOptimal);
  const Enumerated e = Enumerate(p);
  EXPECT_NEAR(s.obj, e.obj, 1e-9);
  EXPECT_NEAR(s.obj, -30.0, 1e-9);
  for (int j : p.binaries) {
    EXPECT_TRUE(s.x[j] == 0.0 || s.x[j] == 1.0);
  }
}

TEST(MipTest, ContradictoryFixingsAreInfeasible) {
  LpBuilder b;
  b.AddVar(0.0, 1.0);
  b.AddVar(0.0, 1.0);
  b.AddRow({{0, 1.0}, {1, 1.0}}, LpBuilder::Sense::kEq, 1.0);
  b.AddRow({{0, 1.0}, {1, -1.0}}, LpBuilder::Sense::kEq, 0.0);
  MipProblem p;
  p.base = b.Build();
  p.binaries = {0, 1};
  const MipSolution s = SolveMip(p);
  EXPECT_EQ(s.status, MipStatus::kInfeasible);
  EXPECT_FALSE(s.has_incumbent);
}

TEST(MipTest, RandomInstancesMatchEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int nb = 4 + trial % 9;
    const int nc = 3;
    const int m = 2 + trial % 3;
    LpBuilder b;
    for (int j = 0; j < nb; ++j) b.AddVar(0.0, 1.0, 5.0 * u(rng));
    for (int j = 0; j < nc; ++j) b.AddVar(-2.0, 3.0, 2.0 * u(rng));
    for (int i = 0; i < m; ++i) {
      LpBuilder::Terms row;
      for (int j = 0; j < nb + nc; ++j) row.emplace_back(j, u(rng));
      b.AddRow(row, i % 2 ? LpBuilder::Sense::kLe : LpBuilder::Sense::kGe,
               0.5 * u(rng));
    }
    MipProblem p;
    p.base = b.Build();
    for (int j = 0; j < nb; ++j) p.binaries.push_back(j);
    if (trial % 4 == 3) {
      QuadraticTerm q{Eigen::VectorXd::Zero(p.base.num_vars()),
                      Eigen::VectorXd::Zero(p.base.num_vars())};
      for (int j = nb; j < nb + nc; ++j) {
        q.q[j] = 1.0 + u(rng);
        q.center[j] = u(rng);
      }
      p.quad = q;
    }
    const MipSolution s = SolveMip(p);
    const Enumerated e = Enumerate(p);
    if (!e.feasible) {
      EXPECT_EQ(s.status, MipStatus::kInfeasible) << trial;
      continue;
    }
    ASSERT_EQ(s.status, MipStatus::kOptimal) << trial;
    EXPECT_NEAR(s.obj, e.obj, 1e-6 * std::max(1.0, std::abs(e.obj))) << trial;
    for (size_t k = 1; k < s.incumbent_trace.size(); ++k) {
      EXPECT_LT(s.incumbent_trace[k], s.incumbent_trace[k - 1]);
    }
    for (size_t k = 1; k < s.gap_trace.size(); ++k) {
      EXPECT_LT(s.gap_trace[k], s.gap_trace[k - 1]);
    }
    if (p.quad) {
      Eigen::VectorXd lo = p.base.lo;
      Eigen::VectorXd hi = p.base.hi;
      for (int j : p.binaries) lo[j] = hi[j] = s.x[j];
      QpSolver qp(p.base, *p.quad);
      const QpSolution fixed = qp.Solve(lo, hi);
      ASSERT_TRUE(fixed.optimal());
      EXPECT_LE(QpStationarityResidual(p.base, *p.quad, fixed), 1e-7);
    }
  }
}

TEST(MipTest, NodeLimitReportsBound) {
  const MipProblem p = Knapsack();
  MipOptions opt;
  opt.node_limit = 1;
  opt.heuristic_period = 0;
  const MipSolution s = SolveMip(p, opt);
  EXPECT_EQ(s.status, MipStatus::kNodeLimit);
  EXPECT_LE(s.bound, -30.0 + 1e-9);
}

TEST(MipTest, PriorityOrderDoesNotChangeOptimum) {
  MipProblem p = Knapsack();
  MipOptions opt;
  opt.priority = {0, 0, 1, 1, 2, 2};
  EXPECT_NEAR(SolveMip(p, opt).obj, -30.0, 1e-9);
  opt.priority = {1, 2};
  EXPECT_THROW(SolveMip(p, opt), ValidationError);
}

TEST(MipTest, ValidationRejectsBadInput) {
  MipProblem p = Knapsack();
  p.binaries.push_back(17);
  EXPECT_THROW(SolveMip(p), ValidationError);
  p = Knapsack();
  p.base.hi[0] = 2.0;
  EXPECT_THROW(SolveMip(p), ValidationError);
  p = Knapsack();
  p.quad = QuadraticTerm{Eigen::VectorXd::Constant(6, -1.0),
                         Eigen::VectorXd::Zero(6)};
  EXPECT_THROW(SolveMip(p), ValidationError);
}

}  // namespace
}  // namespace dpsc
