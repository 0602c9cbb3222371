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

// Dense bounded-variable revised simplex.
//
// Solves    min c'x  s.t.  A x = b,  lo <= x <= hi
// where bounds may be infinite. Duals follow the convention
//
//     c - A'y = mu_lower - mu_upper,   mu_lower, mu_upper >= 0,
//
// so for a cost-minimizing market the dual of a balance row is the price.

#ifndef DPSC_LP_H_
#define DPSC_LP_H_

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dpsc {

struct LpProblem {
  Eigen::VectorXd c;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(b.size()); }

  // Throws ValidationError on inconsistent dimensions, NaNs or lo > hi.
  void Validate() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

std::string ToString(LpStatus status);

struct LpTolerances {
  // Contract tolerances checked by VerifyKkt (normalized residuals).
  double feas = 1e-7;
  double cs = 1e-7;
  double dual = 1e-6;
  // Internal engine tolerances on the equilibrated problem.
  double engine_feas = 1e-9;
  double engine_opt = 1e-9;
  double pivot = 1e-9;
  int max_iterations = 100000;
  // Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 50;
};

enum class VarStatus : std::int8_t { kBasic, kAtLower, kAtUpper, kFree };

// Basis snapshot usable as a warm start for a problem with the same matrix.
// Covers the structural columns followed by one artificial column per row.
struct LpBasis {
  std::vector<VarStatus> status;
  std::vector<std::int8_t> artificial_sign;
  bool empty() const { return status.empty(); }
};

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double obj = 0.0;
  Eigen::VectorXd y;
  Eigen::VectorXd mu_lower;
  Eigen::VectorXd mu_upper;
  int iterations = 0;
  LpBasis basis;

  bool optimal() const { return status == LpStatus::kOptimal; }
  // Reduced costs c - A'y.
  Eigen::VectorXd reduced_costs() const { return mu_lower - mu_upper; }
};

// Reusable solver over a fixed constraint matrix. Bounds and costs may be
// changed between solves, which is how branch-and-bound uses it.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LpProblem& problem, LpTolerances tol = {});
  ~SimplexSolver();
  SimplexSolver(SimplexSolver&&) noexcept;
  SimplexSolver& operator=(SimplexSolver&&) noexcept;

  void SetBounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  void SetCost(const Eigen::VectorXd& c);

  // Solves from scratch, or from `warm` when given and still factorizable.
  LpSolution Solve(const LpBasis* warm = nullptr);

  const LpProblem& problem() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

LpSolution SolveLp(const LpProblem& problem, const LpTolerances& tol = {});

// Assembles equality-form problems from variables and sense-tagged rows.
// Inequality rows get a slack column appended after all user variables.
class LpBuilder {
 public:
  enum class Sense { kEq, kLe, kGe };
  using Terms = std::vector<std::pair<int, double>>;

  int AddVar(double lo, double hi, double cost = 0.0);
  int AddRow(const Terms& terms, Sense sense, double rhs);
  void SetCost(int var, double cost) { cost_[var] = cost; }
  void SetBounds(int var, double lo, double hi) {
    lo_[var] = lo;
    hi_[var] = hi;
  }

  int num_vars() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(rhs_.size()); }
  // Column of the slack of `row` in the built problem, or -1 for equalities.
  int slack_of(int row) const {
    return slack_[row] < 0 ? -1 : num_vars() + slack_[row];
  }
  int num_columns() const { return num_vars() + num_slacks_; }

  LpProblem Build() const;

 private:
  std::vector<double> cost_, lo_, hi_;
  std::vector<Terms> rows_;
  std::vector<Sense> sense_;
  std::vector<double> rhs_;
  std::vector<int> slack_;
  int num_slacks_ = 0;
};

// Normalized KKT residuals of a candidate primal-dual pair.
struct KktReport {
  double primal = 0.0;        // |Ax - b| per row
  double bounds = 0.0;        // bound violation
  double stationarity = 0.0;  // |c - A'y - mu_l + mu_u|
  double dual_sign = 0.0;     // negativity of mu
  double complementarity = 0.0;
  double duality_gap = 0.0;   // absolute
  double relative_gap = 0.0;  // duality_gap / max(1, |c'x|)

  bool Within(const LpTolerances& tol) const;
  std::string ToString() const;
};

KktReport VerifyKkt(const LpProblem& problem, const LpSolution& solution);

}  // namespace dpsc

#endif  // DPSC_LP_H_
