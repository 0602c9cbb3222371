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

#include <algorithm>
#include <cmath>
#include <queue>
#include <utility>

#include "dpsc/common.h"

namespace dpsc {

std::string ToString(MipStatus status) {
  switch (status) {
    case MipStatus::kOptimal:
      return "optimal";
    case MipStatus::kInfeasible:
      return "infeasible";
    case MipStatus::kNodeLimit:
      return "node_limit";
    case MipStatus::kUnbounded:
      return "unbounded";
    case MipStatus::kError:
      return "error";
  }
  return "unknown";
}

void MipProblem::Validate() const {
  base.Validate();
  const int n = base.num_vars();
  for (int j : binaries) {
    if (j < 0 || j >= n)
      throw ValidationError("MipProblem: binary index out of range");
    if (base.lo[j] < 0.0 || base.hi[j] > 1.0) {
      throw ValidationError("MipProblem: binary " + std::to_string(j) +
                            " must have bounds within [0, 1]");
    }
  }
  if (quad.has_value()) {
    if (quad->q.size() != n || quad->center.size() != n) {
      throw ValidationError("MipProblem: quadratic term dimension mismatch");
    }
    for (int j = 0; j < n; ++j) {
      if (!(quad->q[j] >= 0.0)) {
        throw ValidationError("MipProblem: q >= 0 violated");
      }
    }
  }
}

namespace {

struct Node {
  double bound;
  std::int64_t id;
  // (position in binaries, value) fixings along the path from the root.
  std::vector<std::pair<int, std::int8_t>> fixings;
  std::shared_ptr<const LpBasis> warm;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

struct Relaxation {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double obj = 0.0;
  LpBasis basis;
};

class Engine {
 public:
  Engine(const MipProblem& p, const MipOptions& opt)
      : p_(p), opt_(opt), lo_(p.base.lo), hi_(p.base.hi) {
    if (p.quad.has_value()) {
      qp_.emplace(p.base, *p.quad, opt.lp);
    } else {
      lp_.emplace(p.base, opt.lp);
    }
  }

  Relaxation Solve(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                   const LpBasis* warm) {
    Relaxation r;
    if (lp_) {
      lp_->SetBounds(lo, hi);
      LpSolution s = lp_->Solve(warm);
      r.status = s.status;
      r.x = std::move(s.x);
      r.obj = s.obj;
      r.basis = std::move(s.basis);
    } else {
      QpSolution s = qp_->Solve(lo, hi, warm);
      r.status = s.status;
      r.x = std::move(s.x);
      r.obj = s.obj;
      r.basis = std::move(s.basis);
    }
    return r;
  }

  void ApplyFixings(const Node& node, Eigen::VectorXd& lo,
                    Eigen::VectorXd& hi) const {
    lo = lo_;
    hi = hi_;
    for (const auto& [k, v] : node.fixings) {
      const int j = p_.binaries[k];
      lo[j] = hi[j] = v;
    }
  }

  // Position in `binaries` of the variable to branch on, or -1 if integral.
  int PickBranch(const Eigen::VectorXd& x) const {
    int best = -1;
    int best_priority = 0;
    double best_frac = -1.0;
    for (size_t k = 0; k < p_.binaries.size(); ++k) {
      const double v = x[p_.binaries[k]];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac <= opt_.integrality_tol) continue;
      const int prio = opt_.priority.empty() ? 0 : opt_.priority[k];
      if (best < 0 || prio > best_priority ||
          (prio == best_priority && frac > best_frac + 1e-12)) {
        best = static_cast<int>(k);
        best_priority = prio;
        best_frac = frac;
      }
    }
    return best;
  }

  // Fixes every binary to its rounded value and re-solves.
  void TryRounding(const Eigen::VectorXd& x, const LpBasis* warm) {
    Eigen::VectorXd lo = lo_;
    Eigen::VectorXd hi = hi_;
    for (int j : p_.binaries) {
      const double v = std::clamp(std::round(x[j]), lo_[j], hi_[j]);
      lo[j] = hi[j] = v;
    }
    Relaxation r = Solve(lo, hi, warm);
    if (r.status == LpStatus::kOptimal) Offer(r.x, r.obj, lo, hi, false);
  }

  void Offer(Eigen::VectorXd x, double obj, const Eigen::VectorXd& lo,
             const Eigen::VectorXd& hi, bool resolve) {
    if (has_incumbent_ && obj >= incumbent_obj_) return;
    if (resolve) {
      // Snap binaries and re-solve so that the reported point is consistent.
      Eigen::VectorXd flo = lo;
      Eigen::VectorXd fhi = hi;
      for (int j : p_.binaries) {
        const double v = std::round(x[j]);
        flo[j] = fhi[j] = v;
      }
      Relaxation r = Solve(flo, fhi, nullptr);
      if (r.status != LpStatus::kOptimal) return;
      x = std::move(r.x);
      obj = r.obj;
      if (has_incumbent_ && obj >= incumbent_obj_) return;
    }
    for (int j : p_.binaries) x[j] = std::round(x[j]);
    has_incumbent_ = true;
    incumbent_obj_ = obj;
    incumbent_ = std::move(x);
    trace_obj_.push_back(obj);
  }

  double Gap(double bound) const {
    if (!has_incumbent_) return kInf;
    return std::max(0.0, incumbent_obj_ - bound) /
           std::max(1.0, std::abs(incumbent_obj_));
  }

  bool Prunable(double bound) const {
    if (!has_incumbent_) return false;
    return incumbent_obj_ - bound <=
           opt_.gap * std::max(1.0, std::abs(incumbent_obj_));
  }

  MipSolution Run() {
    MipSolution out;
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    std::int64_t next_id = 0;
    open.push(Node{-kInf, next_id++, {}, nullptr});
    Eigen::VectorXd lo, hi;
    bool unbounded = false;
    bool error = false;

    while (!open.empty()) {
      if (out.nodes >= opt_.node_limit) break;
      Node node = open.top();
      open.pop();
      if (Prunable(node.bound)) {
        // Every remaining node has a bound at least as large.
        while (!open.empty()) open.pop();
        break;
      }
      ++out.nodes;
      ApplyFixings(node, lo, hi);
      Relaxation r = Solve(lo, hi, node.warm.get());
      if (r.status == LpStatus::kInfeasible) continue;
      if (r.status == LpStatus::kUnbounded) {
        unbounded = true;
        break;
      }
      if (r.status != LpStatus::kOptimal) {
        error = true;
        continue;
      }
      if (Prunable(r.obj)) continue;
      const int k = PickBranch(r.x);
      if (k < 0) {
        Offer(r.x, r.obj, lo, hi, p_.quad.has_value());
        RecordGap(open);
        continue;
      }
      if (out.nodes == 1 || (opt_.heuristic_period > 0 &&
                             out.nodes % opt_.heuristic_period == 0)) {
        TryRounding(r.x, &r.basis);
        if (Prunable(r.obj)) continue;
      }
      auto warm = std::make_shared<const LpBasis>(std::move(r.basis));
      const double v = r.x[p_.binaries[k]];
      // Child nearer to the relaxation value first for determinism of ties.
      const std::int8_t first = v >= 0.5 ? 1 : 0;
      for (std::int8_t val : {first, static_cast<std::int8_t>(1 - first)}) {
        Node child{r.obj, next_id++, node.fixings, warm};
        child.fixings.emplace_back(k, val);
        open.push(std::move(child));
      }
      RecordGap(open);
    }

    out.has_incumbent = has_incumbent_;
    out.incumbent_trace = trace_obj_;
    out.gap_trace = trace_gap_;
    if (unbounded) {
      out.status = MipStatus::kUnbounded;
      return out;
    }
    // Best-first pops are nondecreasing, so the head of the queue bounds
    // every unexplored node.
    const double open_bound = open.empty() ? kInf : open.top().bound;
    if (has_incumbent_) {
      out.x = incumbent_;
      out.obj = incumbent_obj_;
      out.bound = std::min(incumbent_obj_, open_bound);
      out.gap = Gap(out.bound);
      if (!open.empty() && !Prunable(open_bound)) {
        out.status = MipStatus::kNodeLimit;
      } else {
        out.status = error ? MipStatus::kError : MipStatus::kOptimal;
      }
    } else if (!open.empty()) {
      out.status = MipStatus::kNodeLimit;
      out.bound = open_bound;
      out.gap = kInf;
    } else {
      out.status = error ? MipStatus::kError : MipStatus::kInfeasible;
    }
    return out;
  }

 private:
  void RecordGap(
      const std::priority_queue<Node, std::vector<Node>, NodeOrder>& open) {
    if (!has_incumbent_) return;
    const double b = open.empty() ? incumbent_obj_ : open.top().bound;
    const double g = Gap(std::min(b, incumbent_obj_));
    if (trace_gap_.empty() || g < trace_gap_.back()) trace_gap_.push_back(g);
  }

  const MipProblem& p_;
  const MipOptions& opt_;
  Eigen::VectorXd lo_, hi_;
  std::optional<SimplexSolver> lp_;
  std::optional<QpSolver> qp_;
  bool has_incumbent_ = false;
  double incumbent_obj_ = kInf;
  Eigen::VectorXd incumbent_;
  std::vector<double> trace_obj_;
  std::vector<double> trace_gap_;
};

}  // namespace

MipSolution SolveMip(const MipProblem& p, const MipOptions& opt) {
  p.Validate();
  if (!opt.priority.empty() && opt.priority.size() != p.binaries.size()) {
    throw ValidationError("MipOptions: priority size must match binaries");
  }
  if (!(opt.gap >= 0.0) || opt.node_limit < 1) {
    throw ValidationError("MipOptions: gap >= 0 and node_limit >= 1 required");
  }
  Engine engine(p, opt);
  return engine.Run();
}

}  // namespace dpsc
