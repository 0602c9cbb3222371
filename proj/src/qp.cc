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

#include "dpsc/branchbound.h"
#include "dpsc/common.h"

namespace dpsc {
namespace {

double MaxAbs(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

struct QpSolver::Impl {
  LpProblem base;
  QuadraticTerm quad;
  LpTolerances tol;
  SimplexSolver phase1;
  bool zero_cost = false;

  Impl(const LpProblem& p, const QuadraticTerm& qt, LpTolerances t)
      : base(p), quad(qt), tol(t), phase1(p, t) {
    if (quad.q.size() != p.num_vars() || quad.center.size() != p.num_vars()) {
      throw ValidationError("QuadraticTerm: dimension mismatch");
    }
    for (int j = 0; j < p.num_vars(); ++j) {
      if (!(quad.q[j] >= 0.0)) {
        throw ValidationError("QuadraticTerm: q >= 0 violated");
      }
    }
  }

  double Objective(const Eigen::VectorXd& x) const {
    return base.c.dot(x) +
           (quad.q.array() * (x - quad.center).array().square()).sum();
  }

  Eigen::VectorXd Gradient(const Eigen::VectorXd& x) const {
    return base.c + 2.0 * quad.q.cwiseProduct(x - quad.center);
  }

  QpSolution Run(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                 const LpBasis* warm) {
    QpSolution out;
    const int n = base.num_vars();
    const int m = base.num_rows();
    phase1.SetBounds(lo, hi);

    // Any vertex will do as a start; the linear cost usually lands near the
    // optimum, and a zero cost avoids unbounded phase-1 rays.
    LpSolution start;
    if (!zero_cost) {
      phase1.SetCost(base.c);
      start = phase1.Solve(warm);
      if (start.status == LpStatus::kUnbounded) {
        zero_cost = true;
      }
    }
    if (zero_cost) {
      phase1.SetCost(Eigen::VectorXd::Zero(n));
      start = phase1.Solve(warm);
    }
    out.basis = start.basis;
    out.iterations = start.iterations;
    if (start.status != LpStatus::kOptimal) {
      out.status = start.status == LpStatus::kInfeasible
                       ? LpStatus::kInfeasible
                       : LpStatus::kIterationLimit;
      return out;
    }

    Eigen::VectorXd x = start.x;
    // Working set: -1 at lower, +1 at upper, 0 free.
    std::vector<int> active(n, 0);
    for (int j = 0; j < n; ++j) {
      const VarStatus s = start.basis.status[j];
      if (s == VarStatus::kAtLower && !std::isinf(lo[j])) active[j] = -1;
      if (s == VarStatus::kAtUpper && !std::isinf(hi[j])) active[j] = 1;
      if (lo[j] == hi[j]) active[j] = -1;
    }

    const double scale =
        1.0 + MaxAbs(base.c) + MaxAbs(quad.q) * (1.0 + MaxAbs(x));
    const double opt_tol = 1e-10 * scale;
    const int max_iter = 50 * (n + m) + 100;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);

    for (int iter = 0;; ++iter) {
      if (iter >= max_iter) {
        out.status = LpStatus::kIterationLimit;
        return out;
      }
      std::vector<int> free;
      for (int j = 0; j < n; ++j) {
        if (active[j] == 0) free.push_back(j);
      }
      const int nf = static_cast<int>(free.size());
      const Eigen::VectorXd g = Gradient(x);
      Eigen::VectorXd gf(nf);
      Eigen::MatrixXd af(m, nf);
      for (int k = 0; k < nf; ++k) {
        gf[k] = g[free[k]];
        af.col(k) = base.a.col(free[k]);
      }

      // Null space of the free columns from a QR of their transpose.
      Eigen::MatrixXd z;
      int rank = 0;
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
      if (m > 0 && nf > 0) {
        qr.compute(af.transpose());
        qr.setThreshold(1e-11);
        rank = static_cast<int>(qr.rank());
        const Eigen::MatrixXd qfull = qr.householderQ();
        z = qfull.rightCols(nf - rank);
      } else {
        z = Eigen::MatrixXd::Identity(nf, nf);
      }

      Eigen::VectorXd p = Eigen::VectorXd::Zero(nf);
      bool ray = false;
      if (z.cols() > 0) {
        Eigen::MatrixXd hz(nf, z.cols());
        for (int k = 0; k < nf; ++k)
          hz.row(k) = 2.0 * quad.q[free[k]] * z.row(k);
        const Eigen::MatrixXd hr = z.transpose() * hz;
        const Eigen::VectorXd gr = z.transpose() * gf;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hr);
        const Eigen::VectorXd ev = eig.eigenvalues();
        const Eigen::MatrixXd& u = eig.eigenvectors();
        const Eigen::VectorXd ug = u.transpose() * gr;
        const double ev_tol = 1e-12 * (1.0 + MaxAbs(ev));
        Eigen::VectorXd pz = Eigen::VectorXd::Zero(z.cols());
        Eigen::VectorXd ray_dir = Eigen::VectorXd::Zero(z.cols());
        for (int i = 0; i < ev.size(); ++i) {
          if (ev[i] > ev_tol) {
            pz -= u.col(i) * (ug[i] / ev[i]);
          } else if (std::abs(ug[i]) > opt_tol) {
            ray_dir -= u.col(i) * ug[i];
            ray = true;
          }
        }
        p = z * (ray ? ray_dir : pz);
      }

      if (!ray && MaxAbs(p) <= 1e-12 * (1.0 + MaxAbs(x))) {
        // Stationary on the working set: check multiplier signs.
        if (m > 0 && nf > 0) {
          y = af.transpose().colPivHouseholderQr().solve(gf);
        } else {
          y.setZero();
        }
        d = g - base.a.transpose() * y;
        int drop = -1;
        double worst = opt_tol;
        for (int j = 0; j < n; ++j) {
          if (active[j] == 0 || lo[j] == hi[j]) continue;
          const double viol = active[j] < 0 ? -d[j] : d[j];
          if (viol > worst) {
            worst = viol;
            drop = j;
          }
        }
        if (drop < 0) break;
        active[drop] = 0;
        continue;
      }

      double alpha = ray ? kInf : 1.0;
      int block = -1;
      int block_side = 0;
      for (int k = 0; k < nf; ++k) {
        const int j = free[k];
        if (p[k] < -1e-15 && !std::isinf(lo[j])) {
          const double a = std::max(0.0, x[j] - lo[j]) / -p[k];
          if (a < alpha) {
            alpha = a;
            block = j;
            block_side = -1;
          }
        } else if (p[k] > 1e-15 && !std::isinf(hi[j])) {
          const double a = std::max(0.0, hi[j] - x[j]) / p[k];
          if (a < alpha) {
            alpha = a;
            block = j;
            block_side = 1;
          }
        }
      }
      if (std::isinf(alpha)) {
        out.status = LpStatus::kUnbounded;
        return out;
      }
      for (int k = 0; k < nf; ++k) x[free[k]] += alpha * p[k];
      if (block >= 0) {
        active[block] = block_side;
        x[block] = block_side < 0 ? lo[block] : hi[block];
      }
    }

    for (int j = 0; j < n; ++j) {
      if (active[j] < 0) x[j] = lo[j];
      if (active[j] > 0) x[j] = hi[j];
    }
    out.status = LpStatus::kOptimal;
    out.x = x;
    out.obj = Objective(x);
    out.y = y;
    out.mu_lower = Eigen::VectorXd::Zero(n);
    out.mu_upper = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
      if (active[j] == 0) continue;
      if (lo[j] == hi[j]) {
        out.mu_lower[j] = std::max(d[j], 0.0);
        out.mu_upper[j] = std::max(-d[j], 0.0);
      } else if (active[j] < 0) {
        out.mu_lower[j] = std::max(d[j], 0.0);
      } else {
        out.mu_upper[j] = std::max(-d[j], 0.0);
      }
    }
    return out;
  }
};

QpSolver::QpSolver(const LpProblem& base, const QuadraticTerm& quad,
                   LpTolerances tol)
    : impl_(std::make_unique<Impl>(base, quad, tol)) {}
QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

QpSolution QpSolver::Solve(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                           const LpBasis* warm) {
  return impl_->Run(lo, hi, warm);
}

QpSolution SolveQpNode(const LpProblem& base, const QuadraticTerm& quad,
                       const LpTolerances& tol) {
  QpSolver solver(base, quad, tol);
  return solver.Solve(base.lo, base.hi);
}

double QpStationarityResidual(const LpProblem& base, const QuadraticTerm& quad,
                              const QpSolution& s) {
  const Eigen::VectorXd g =
      base.c + 2.0 * quad.q.cwiseProduct(s.x - quad.center);
  const Eigen::VectorXd r =
      g - base.a.transpose() * s.y - s.mu_lower + s.mu_upper;
  double worst = 0.0;
  for (int j = 0; j < r.size(); ++j) {
    const double scale =
        1.0 + std::abs(g[j]) + base.a.col(j).cwiseAbs().dot(s.y.cwiseAbs());
    worst = std::max(worst, std::abs(r[j]) / scale);
  }
  return worst;
}

}  // namespace dpsc
