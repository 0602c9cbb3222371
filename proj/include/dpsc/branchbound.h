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

// Best-first branch-and-bound over 0/1 variables with LP or diagonal convex
// QP relaxations.

#ifndef DPSC_BRANCHBOUND_H_
#define DPSC_BRANCHBOUND_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsc/lp.h"

namespace dpsc {

// Adds sum_i q_i (x_i - center_i)^2 to the linear objective.
struct QuadraticTerm {
  Eigen::VectorXd q;
  Eigen::VectorXd center;
};

struct QpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double obj = 0.0;
  // grad f(x) - A'y = mu_lower - mu_upper.
  Eigen::VectorXd y;
  Eigen::VectorXd mu_lower;
  Eigen::VectorXd mu_upper;
  int iterations = 0;
  LpBasis basis;  // basis of the phase-1 LP, reusable as a warm start

  bool optimal() const { return status == LpStatus::kOptimal; }
};

// Primal active-set method on a diagonal Hessian. A feasible start comes
// from the simplex; each iteration solves the equality-constrained subproblem
// in the null space of the free columns.
class QpSolver {
 public:
  QpSolver(const LpProblem& base, const QuadraticTerm& quad,
           LpTolerances tol = {});
  ~QpSolver();
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;

  QpSolution Solve(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                   const LpBasis* warm = nullptr);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

QpSolution SolveQpNode(const LpProblem& base, const QuadraticTerm& quad,
                       const LpTolerances& tol = {});

// Max-norm of grad f - A'y - mu_l + mu_u, normalized like VerifyKkt.
double QpStationarityResidual(const LpProblem& base, const QuadraticTerm& quad,
                              const QpSolution& s);

struct MipProblem {
  LpProblem base;
  std::optional<QuadraticTerm> quad;
  std::vector<int> binaries;

  // Throws ValidationError on q < 0 or binaries outside [0, 1].
  void Validate() const;
};

enum class MipStatus { kOptimal, kInfeasible, kNodeLimit, kUnbounded, kError };

std::string ToString(MipStatus status);

struct MipOptions {
  double gap = 1e-6;  // relative, against max(1, |incumbent|)
  std::int64_t node_limit = 1000000;
  double integrality_tol = 1e-6;
  // Optional per-binary priority (same order as MipProblem::binaries).
  // Fractional binaries of the highest priority are branched on first.
  std::vector<int> priority;
  // Run the rounding heuristic every this many nodes (and at the root).
  int heuristic_period = 50;
  LpTolerances lp;
};

struct MipSolution {
  MipStatus status = MipStatus::kInfeasible;
  Eigen::VectorXd x;
  double obj = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  std::int64_t nodes = 0;
  bool has_incumbent = false;
  // Incumbent objective and gap after each improvement, in order.
  std::vector<double> incumbent_trace;
  std::vector<double> gap_trace;
};

MipSolution SolveMip(const MipProblem& p, const MipOptions& opt = {});

}  // namespace dpsc

#endif  // DPSC_BRANCHBOUND_H_
