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

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "dpsc/common.h"
#include "dpsc/lp.h"

namespace dpsc {

void LpProblem::Validate() const {
  const int n = num_vars();
  const int m = num_rows();
  if (a.rows() != m || a.cols() != n || lo.size() != n || hi.size() != n) {
    throw ValidationError("LpProblem: inconsistent dimensions");
  }
  for (int j = 0; j < n; ++j) {
    if (std::isnan(c[j]) || std::isnan(lo[j]) || std::isnan(hi[j])) {
      throw ValidationError("LpProblem: NaN in cost or bounds");
    }
    if (lo[j] > hi[j]) {
      throw ValidationError("LpProblem: lo > hi for variable " +
                            std::to_string(j));
    }
    if (lo[j] == kInf || hi[j] == -kInf) {
      throw ValidationError("LpProblem: empty bound range for variable " +
                            std::to_string(j));
    }
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw ValidationError("LpProblem: non-finite matrix or rhs");
  }
}

std::string ToString(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal:
      return "optimal";
    case LpStatus::kInfeasible:
      return "infeasible";
    case LpStatus::kUnbounded:
      return "unbounded";
    case LpStatus::kIterationLimit:
      return "iteration_limit";
  }
  return "unknown";
}

struct SimplexSolver::Impl {
  LpProblem original;
  LpTolerances tol;
  int m = 0;
  int n = 0;

  // Equilibrated data. Columns n..n+m-1 are the artificials.
  Eigen::VectorXd row_scale;
  Eigen::VectorXd col_scale;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  std::vector<int> basis;
  std::vector<VarStatus> status;
  std::vector<std::int8_t> art_sign;
  Eigen::VectorXd x;
  Eigen::MatrixXd binv;
  int pivots_since_refactor = 0;

  Impl(const LpProblem& p, LpTolerances t) : original(p), tol(t) {
    original.Validate();
    m = original.num_rows();
    n = original.num_vars();
    Equilibrate();
    lo.resize(n + m);
    hi.resize(n + m);
    SetScaledBounds(original.lo, original.hi);
    lo.tail(m).setZero();
    hi.tail(m).setZero();
  }

  void Equilibrate() {
    row_scale = Eigen::VectorXd::Ones(m);
    col_scale = Eigen::VectorXd::Ones(n);
    a = original.a;
    for (int i = 0; i < m; ++i) {
      const double r = a.row(i).cwiseAbs().maxCoeff();
      if (r > 0.0) row_scale[i] = 1.0 / r;
    }
    a = row_scale.asDiagonal() * a;
    for (int j = 0; j < n; ++j) {
      const double s = m > 0 ? a.col(j).cwiseAbs().maxCoeff() : 0.0;
      if (s > 0.0) col_scale[j] = 1.0 / s;
    }
    a = a * col_scale.asDiagonal();
    b = row_scale.cwiseProduct(original.b);
    c = col_scale.cwiseProduct(original.c);
  }

  void SetScaledBounds(const Eigen::VectorXd& l, const Eigen::VectorXd& h) {
    for (int j = 0; j < n; ++j) {
      lo[j] = std::isinf(l[j]) ? l[j] : l[j] / col_scale[j];
      hi[j] = std::isinf(h[j]) ? h[j] : h[j] / col_scale[j];
    }
  }

  void Column(int j, Eigen::VectorXd& out) const {
    if (j < n) {
      out = a.col(j);
    } else {
      out.setZero(m);
      out[j - n] = art_sign[j - n];
    }
  }

  double FeasTol(double bound) const {
    return tol.engine_feas * (1.0 + std::abs(bound));
  }

  void PlaceNonbasic(int j) {
    VarStatus& s = status[j];
    if (s == VarStatus::kBasic) return;
    const bool has_lo = !std::isinf(lo[j]);
    const bool has_hi = !std::isinf(hi[j]);
    if (s == VarStatus::kAtLower && !has_lo)
      s = has_hi ? VarStatus::kAtUpper : VarStatus::kFree;
    if (s == VarStatus::kAtUpper && !has_hi)
      s = has_lo ? VarStatus::kAtLower : VarStatus::kFree;
    if (s == VarStatus::kFree && has_lo) s = VarStatus::kAtLower;
    if (s == VarStatus::kFree && has_hi) s = VarStatus::kAtUpper;
    switch (s) {
      case VarStatus::kAtLower:
        x[j] = lo[j];
        break;
      case VarStatus::kAtUpper:
        x[j] = hi[j];
        break;
      default:
        x[j] = 0.0;
    }
  }

  void ColdStart() {
    status.assign(n + m, VarStatus::kAtLower);
    x.setZero(n + m);
    for (int j = 0; j < n; ++j) PlaceNonbasic(j);
    Eigen::VectorXd rhs = b - a * x.head(n);
    art_sign.assign(m, 1);
    basis.resize(m);
    binv.setZero(m, m);
    for (int i = 0; i < m; ++i) {
      art_sign[i] = rhs[i] >= 0.0 ? 1 : -1;
      basis[i] = n + i;
      status[n + i] = VarStatus::kBasic;
      x[n + i] = std::abs(rhs[i]);
      binv(i, i) = art_sign[i];
    }
    pivots_since_refactor = 0;
  }

  bool Refactor() {
    Eigen::MatrixXd bmat(m, m);
    Eigen::VectorXd col;
    for (int i = 0; i < m; ++i) {
      Column(basis[i], col);
      bmat.col(i) = col;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bmat);
    lu.setThreshold(1e-11);
    if (!lu.isInvertible()) return false;
    binv = lu.inverse();
    pivots_since_refactor = 0;
    return true;
  }

  void ComputeBasics() {
    Eigen::VectorXd rhs = b;
    for (int j = 0; j < n + m; ++j) {
      if (status[j] != VarStatus::kBasic && x[j] != 0.0) {
        if (j < n) {
          rhs.noalias() -= a.col(j) * x[j];
        } else {
          rhs[j - n] -= art_sign[j - n] * x[j];
        }
      }
    }
    Eigen::VectorXd xb = binv * rhs;
    for (int i = 0; i < m; ++i) x[basis[i]] = xb[i];
  }

  bool WarmStart(const LpBasis& warm) {
    if (static_cast<int>(warm.status.size()) != n + m ||
        static_cast<int>(warm.artificial_sign.size()) != m) {
      return false;
    }
    status = warm.status;
    art_sign = warm.artificial_sign;
    basis.clear();
    for (int j = 0; j < n + m; ++j) {
      if (status[j] == VarStatus::kBasic) basis.push_back(j);
    }
    if (static_cast<int>(basis.size()) != m) return false;
    x.setZero(n + m);
    for (int j = 0; j < n + m; ++j) PlaceNonbasic(j);
    if (!Refactor()) return false;
    ComputeBasics();
    return true;
  }

  // Phase-1 cost of basic variable i: +1 above its upper bound, -1 below its
  // lower bound.
  double InfeasibilityCost(int v) const {
    if (x[v] < lo[v] - FeasTol(lo[v])) return -1.0;
    if (x[v] > hi[v] + FeasTol(hi[v])) return 1.0;
    return 0.0;
  }

  double TotalInfeasibility() const {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      const int v = basis[i];
      if (x[v] < lo[v] - FeasTol(lo[v])) total += lo[v] - x[v];
      if (x[v] > hi[v] + FeasTol(hi[v])) total += x[v] - hi[v];
    }
    return total;
  }

  LpStatus Iterate(int& iterations) {
    Eigen::VectorXd cb(m);
    Eigen::VectorXd y(m);
    Eigen::VectorXd d(n);
    Eigen::VectorXd alpha(m);
    int degenerate_run = 0;
    int stall_repairs = 0;
    while (true) {
      if (iterations >= tol.max_iterations) return LpStatus::kIterationLimit;
      if (pivots_since_refactor >= 100) {
        if (!Refactor()) return LpStatus::kIterationLimit;
        ComputeBasics();
      }
      bool phase1 = false;
      for (int i = 0; i < m; ++i) {
        const double cost = InfeasibilityCost(basis[i]);
        cb[i] = cost;
        if (cost != 0.0) phase1 = true;
      }
      if (!phase1) {
        for (int i = 0; i < m; ++i) {
          cb[i] = basis[i] < n ? c[basis[i]] : 0.0;
        }
      }
      y.noalias() = binv.transpose() * cb;
      d.noalias() = -a.transpose() * y;
      if (!phase1) d += c;

      const bool bland = degenerate_run > tol.degenerate_switch;
      int entering = -1;
      int direction = 0;
      double best = 0.0;
      for (int j = 0; j < n; ++j) {
        const VarStatus s = status[j];
        if (s == VarStatus::kBasic || lo[j] == hi[j]) continue;
        const double dj = d[j];
        int dir = 0;
        if (s == VarStatus::kAtLower && dj < -tol.engine_opt) dir = 1;
        if (s == VarStatus::kAtUpper && dj > tol.engine_opt) dir = -1;
        if (s == VarStatus::kFree && std::abs(dj) > tol.engine_opt) {
          dir = dj < 0 ? 1 : -1;
        }
        if (dir == 0) continue;
        if (bland) {
          entering = j;
          direction = dir;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          entering = j;
          direction = dir;
        }
      }
      if (entering < 0) {
        if (!phase1) return LpStatus::kOptimal;
        return LpStatus::kInfeasible;
      }

      alpha.noalias() = binv * a.col(entering);
      // Bound flip of the entering variable.
      double step = kInf;
      if (!std::isinf(lo[entering]) && !std::isinf(hi[entering])) {
        step = hi[entering] - lo[entering];
      }
      int leave_row = -1;
      bool leave_at_lower = true;
      double leave_pivot = 0.0;
      for (int i = 0; i < m; ++i) {
        if (std::abs(alpha[i]) <= tol.pivot) continue;
        const int v = basis[i];
        const double delta = -direction * alpha[i];
        const double xv = x[v];
        double limit = kInf;
        bool at_lower = true;
        if (delta < 0.0) {
          if (phase1 && xv > hi[v] + FeasTol(hi[v])) {
            limit = (xv - hi[v]) / -delta;
            at_lower = false;
          } else if (xv >= lo[v] - FeasTol(lo[v]) && !std::isinf(lo[v])) {
            limit = std::max(0.0, xv - lo[v]) / -delta;
            at_lower = true;
          }
        } else {
          if (phase1 && xv < lo[v] - FeasTol(lo[v])) {
            limit = (lo[v] - xv) / delta;
            at_lower = true;
          } else if (xv <= hi[v] + FeasTol(hi[v]) && !std::isinf(hi[v])) {
            limit = std::max(0.0, hi[v] - xv) / delta;
            at_lower = false;
          }
        }
        if (std::isinf(limit)) continue;
        bool take = false;
        const double slack = std::isinf(step) ? 0.0 : 1e-12 * (1.0 + step);
        if (limit < step - slack) {
          take = true;
        } else if (limit <= step + slack && leave_row >= 0) {
          // Tie: larger pivot for stability, or smallest index under Bland.
          take = bland ? v < basis[leave_row]
                       : std::abs(alpha[i]) > std::abs(leave_pivot);
        }
        if (take) {
          step = limit;
          leave_row = i;
          leave_at_lower = at_lower;
          leave_pivot = alpha[i];
        }
      }

      if (std::isinf(step)) {
        if (!phase1) return LpStatus::kUnbounded;
        // Phase 1 can only lack a blocking row through round-off.
        if (++stall_repairs > 5 || !Refactor()) {
          return LpStatus::kIterationLimit;
        }
        ComputeBasics();
        continue;
      }

      ++iterations;
      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;
      x[entering] += direction * step;
      for (int i = 0; i < m; ++i) x[basis[i]] -= direction * step * alpha[i];

      if (leave_row < 0) {
        status[entering] =
            direction > 0 ? VarStatus::kAtUpper : VarStatus::kAtLower;
        x[entering] = direction > 0 ? hi[entering] : lo[entering];
        continue;
      }
      const int leaving = basis[leave_row];
      status[leaving] =
          leave_at_lower ? VarStatus::kAtLower : VarStatus::kAtUpper;
      x[leaving] = leave_at_lower ? lo[leaving] : hi[leaving];
      basis[leave_row] = entering;
      status[entering] = VarStatus::kBasic;

      const Eigen::RowVectorXd pivot_row = binv.row(leave_row) / leave_pivot;
      binv.noalias() -= alpha * pivot_row;
      binv.row(leave_row) = pivot_row;
      ++pivots_since_refactor;
    }
  }

  LpSolution Run(const LpBasis* warm) {
    LpSolution sol;
    if (warm == nullptr || warm->empty() || !WarmStart(*warm)) ColdStart();
    int iterations = 0;
    LpStatus st = LpStatus::kIterationLimit;
    for (int attempt = 0; attempt < 4; ++attempt) {
      st = Iterate(iterations);
      if (st != LpStatus::kOptimal) break;
      // Clean up drift with a fresh factorization before accepting.
      if (!Refactor()) {
        ColdStart();
        continue;
      }
      ComputeBasics();
      if (TotalInfeasibility() == 0.0) break;
    }
    sol.status = st;
    sol.iterations = iterations;
    sol.basis.status = status;
    sol.basis.artificial_sign = art_sign;
    if (st != LpStatus::kOptimal) {
      sol.x = col_scale.cwiseProduct(x.head(n));
      return sol;
    }
    Eigen::VectorXd cb(m);
    for (int i = 0; i < m; ++i) cb[i] = basis[i] < n ? c[basis[i]] : 0.0;
    Eigen::VectorXd y = binv.transpose() * cb;
    Eigen::VectorXd d = c - a.transpose() * y;

    sol.x = col_scale.cwiseProduct(x.head(n));
    sol.y = row_scale.cwiseProduct(y);
    sol.mu_lower.setZero(n);
    sol.mu_upper.setZero(n);
    for (int j = 0; j < n; ++j) {
      const double dj = d[j] / col_scale[j];
      switch (status[j]) {
        case VarStatus::kAtLower:
          if (lo[j] == hi[j]) {
            sol.mu_lower[j] = std::max(dj, 0.0);
            sol.mu_upper[j] = std::max(-dj, 0.0);
          } else {
            sol.mu_lower[j] = std::max(dj, 0.0);
          }
          break;
        case VarStatus::kAtUpper:
          sol.mu_upper[j] = std::max(-dj, 0.0);
          break;
        default:
          break;
      }
    }
    // Snap onto bounds that the scaled solve hit exactly.
    for (int j = 0; j < n; ++j) {
      if (status[j] == VarStatus::kAtLower) sol.x[j] = original.lo[j];
      if (status[j] == VarStatus::kAtUpper) sol.x[j] = original.hi[j];
    }
    sol.obj = original.c.dot(sol.x);
    return sol;
  }
};

SimplexSolver::SimplexSolver(const LpProblem& problem, LpTolerances tol)
    : impl_(std::make_unique<Impl>(problem, tol)) {}
SimplexSolver::~SimplexSolver() = default;
SimplexSolver::SimplexSolver(SimplexSolver&&) noexcept = default;
SimplexSolver& SimplexSolver::operator=(SimplexSolver&&) noexcept = default;

void SimplexSolver::SetBounds(const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi) {
  Impl& s = *impl_;
  if (lo.size() != s.n || hi.size() != s.n) {
    throw ValidationError("SetBounds: dimension mismatch");
  }
  for (int j = 0; j < s.n; ++j) {
    if (lo[j] > hi[j]) {
      throw ValidationError("SetBounds: lo > hi for variable " +
                            std::to_string(j));
    }
  }
  s.original.lo = lo;
  s.original.hi = hi;
  s.SetScaledBounds(lo, hi);
}

void SimplexSolver::SetCost(const Eigen::VectorXd& c) {
  Impl& s = *impl_;
  if (c.size() != s.n) throw ValidationError("SetCost: dimension mismatch");
  s.original.c = c;
  s.c = s.col_scale.cwiseProduct(c);
}

LpSolution SimplexSolver::Solve(const LpBasis* warm) {
  return impl_->Run(warm);
}

const LpProblem& SimplexSolver::problem() const { return impl_->original; }

LpSolution SolveLp(const LpProblem& problem, const LpTolerances& tol) {
  SimplexSolver solver(problem, tol);
  return solver.Solve();
}

int LpBuilder::AddVar(double lo, double hi, double cost) {
  cost_.push_back(cost);
  lo_.push_back(lo);
  hi_.push_back(hi);
  return num_vars() - 1;
}

int LpBuilder::AddRow(const Terms& terms, Sense sense, double rhs) {
  rows_.push_back(terms);
  sense_.push_back(sense);
  rhs_.push_back(rhs);
  slack_.push_back(sense == Sense::kEq ? -1 : num_slacks_++);
  return num_rows() - 1;
}

LpProblem LpBuilder::Build() const {
  const int n = num_vars();
  const int cols = num_columns();
  const int m = num_rows();
  LpProblem p;
  p.c = Eigen::VectorXd::Zero(cols);
  p.lo = Eigen::VectorXd::Zero(cols);
  p.hi = Eigen::VectorXd::Constant(cols, kInf);
  p.a = Eigen::MatrixXd::Zero(m, cols);
  p.b = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < n; ++j) {
    p.c[j] = cost_[j];
    p.lo[j] = lo_[j];
    p.hi[j] = hi_[j];
  }
  for (int i = 0; i < m; ++i) {
    for (const auto& [j, v] : rows_[i]) p.a(i, j) += v;
    p.b[i] = rhs_[i];
    if (slack_[i] >= 0) {
      // a'x + s = b with s >= 0 for <=, s <= 0 for >=.
      const int col = n + slack_[i];
      p.a(i, col) = 1.0;
      if (sense_[i] == Sense::kGe) {
        p.lo[col] = -kInf;
        p.hi[col] = 0.0;
      }
    }
  }
  return p;
}

bool KktReport::Within(const LpTolerances& tol) const {
  return primal <= tol.feas && bounds <= tol.feas && stationarity <= tol.feas &&
         dual_sign <= tol.feas && complementarity <= tol.cs &&
         relative_gap <= tol.dual;
}

std::string KktReport::ToString() const {
  std::ostringstream os;
  os << "primal=" << primal << " bounds=" << bounds
     << " stationarity=" << stationarity << " dual_sign=" << dual_sign
     << " complementarity=" << complementarity << " gap=" << duality_gap
     << " rel_gap=" << relative_gap;
  return os.str();
}

KktReport VerifyKkt(const LpProblem& p, const LpSolution& s) {
  KktReport r;
  const int n = p.num_vars();
  const int m = p.num_rows();
  const Eigen::VectorXd& x = s.x;
  Eigen::VectorXd y = s.y.size() == m ? s.y : Eigen::VectorXd::Zero(m);
  Eigen::VectorXd ml =
      s.mu_lower.size() == n ? s.mu_lower : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mu =
      s.mu_upper.size() == n ? s.mu_upper : Eigen::VectorXd::Zero(n);

  const Eigen::VectorXd ax = p.a * x;
  for (int i = 0; i < m; ++i) {
    const double scale =
        1.0 + std::abs(p.b[i]) + (p.a.row(i).cwiseAbs() * x.cwiseAbs())(0);
    r.primal = std::max(r.primal, std::abs(ax[i] - p.b[i]) / scale);
  }
  const Eigen::VectorXd aty = p.a.transpose() * y;
  double primal_obj = p.c.dot(x);
  double dual_obj = p.b.dot(y);
  for (int j = 0; j < n; ++j) {
    if (!std::isinf(p.lo[j])) {
      r.bounds =
          std::max(r.bounds, (p.lo[j] - x[j]) / (1.0 + std::abs(p.lo[j])));
    }
    if (!std::isinf(p.hi[j])) {
      r.bounds =
          std::max(r.bounds, (x[j] - p.hi[j]) / (1.0 + std::abs(p.hi[j])));
    }
    const double scale =
        1.0 + std::abs(p.c[j]) + (p.a.col(j).cwiseAbs().dot(y.cwiseAbs()));
    r.stationarity = std::max(
        r.stationarity, std::abs(p.c[j] - aty[j] - ml[j] + mu[j]) / scale);
    r.dual_sign = std::max({r.dual_sign, -ml[j], -mu[j]});
    const double obj_scale = 1.0 + std::abs(primal_obj);
    if (ml[j] != 0.0) {
      if (std::isinf(p.lo[j])) {
        r.complementarity = kInf;
      } else {
        r.complementarity = std::max(
            r.complementarity, std::abs(ml[j] * (x[j] - p.lo[j])) / obj_scale);
        dual_obj += ml[j] * p.lo[j];
      }
    }
    if (mu[j] != 0.0) {
      if (std::isinf(p.hi[j])) {
        r.complementarity = kInf;
      } else {
        r.complementarity = std::max(
            r.complementarity, std::abs(mu[j] * (p.hi[j] - x[j])) / obj_scale);
        dual_obj -= mu[j] * p.hi[j];
      }
    }
  }
  r.bounds = std::max(r.bounds, 0.0);
  r.duality_gap = std::abs(primal_obj - dual_obj);
  r.relative_gap = r.duality_gap / std::max(1.0, std::abs(primal_obj));
  return r;
}

}  // namespace dpsc
