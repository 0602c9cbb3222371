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

#include "dpsc/oracles.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpsc/common.h"

namespace dpsc {

std::string ToString(OracleStatus status) {
  switch (status) {
    case OracleStatus::kOptimal:
      return "optimal";
    case OracleStatus::kInfeasible:
      return "infeasible";
    case OracleStatus::kUnbounded:
      return "unbounded";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Active-set enumeration for small LPs.

namespace {

enum class Slot : std::int8_t { kLower, kUpper, kFree };

struct Enumerator {
  const Eigen::MatrixXd& a;
  const Eigen::VectorXd& b;
  const Eigen::VectorXd& c;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  std::int64_t limit;
  int n;
  int m;

  std::vector<Slot> slots;
  std::int64_t evaluations = 0;
  bool found = false;
  double best = kInf;
  Eigen::VectorXd best_x;

  void Evaluate() {
    if (++evaluations > limit) {
      throw ValidationError("lp_vertex_oracle: evaluation limit exceeded");
    }
    std::vector<int> free_idx;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
      switch (slots[j]) {
        case Slot::kLower:
          x[j] = lo[j];
          break;
        case Slot::kUpper:
          x[j] = hi[j];
          break;
        case Slot::kFree:
          free_idx.push_back(j);
          break;
      }
    }
    Eigen::VectorXd rhs = b - a * x;
    if (!free_idx.empty()) {
      Eigen::MatrixXd af(m, free_idx.size());
      for (size_t k = 0; k < free_idx.size(); ++k)
        af.col(k) = a.col(free_idx[k]);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(af);
      qr.setThreshold(1e-10);
      if (qr.rank() != static_cast<int>(free_idx.size())) return;
      const Eigen::VectorXd xf = qr.solve(rhs);
      for (size_t k = 0; k < free_idx.size(); ++k) x[free_idx[k]] = xf[k];
    }
    const Eigen::VectorXd resid = a * x - b;
    for (int i = 0; i < m; ++i) {
      const double scale =
          1.0 + std::abs(b[i]) + a.row(i).cwiseAbs().dot(x.cwiseAbs());
      if (std::abs(resid[i]) > 1e-9 * scale) return;
    }
    for (int j = 0; j < n; ++j) {
      if (x[j] < lo[j] - 1e-9 * (1.0 + std::abs(lo[j]))) return;
      if (x[j] > hi[j] + 1e-9 * (1.0 + std::abs(hi[j]))) return;
      x[j] = std::clamp(x[j], lo[j], hi[j]);
    }
    const double obj = c.dot(x);
    if (!found || obj < best - 1e-12 * (1.0 + std::abs(best))) {
      found = true;
      best = obj;
      best_x = x;
    }
  }

  void Recurse(int j, int free_count) {
    if (j == n) {
      Evaluate();
      return;
    }
    slots[j] = Slot::kLower;
    Recurse(j + 1, free_count);
    if (hi[j] > lo[j]) {
      slots[j] = Slot::kUpper;
      Recurse(j + 1, free_count);
      if (free_count < m) {
        slots[j] = Slot::kFree;
        Recurse(j + 1, free_count + 1);
      }
    }
  }
};

Enumerator RunEnumeration(const LpProblem& p, double box, std::int64_t limit) {
  Enumerator e{p.a,          p.b, p.c, p.lo,  p.hi, limit, p.num_vars(),
               p.num_rows(), {},  0,   false, kInf, {}};
  for (int j = 0; j < e.n; ++j) {
    e.lo[j] = std::max(e.lo[j], -box);
    e.hi[j] = std::min(e.hi[j], box);
  }
  e.slots.assign(e.n, Slot::kLower);
  e.Recurse(0, 0);
  return e;
}

}  // namespace

VertexOracleResult LpVertexOracle(const LpProblem& p, const OracleConfig& cfg) {
  if (p.num_vars() > 10) {
    throw ValidationError("lp_vertex_oracle: at most 10 variables supported");
  }
  if (p.a.rows() != p.num_rows() || p.a.cols() != p.num_vars() ||
      p.lo.size() != p.num_vars() || p.hi.size() != p.num_vars()) {
    throw ValidationError("lp_vertex_oracle: inconsistent dimensions");
  }
  VertexOracleResult out;
  Enumerator first = RunEnumeration(p, cfg.box, cfg.max_evaluations);
  out.evaluations = first.evaluations;
  if (!first.found) {
    out.status = OracleStatus::kInfeasible;
    return out;
  }
  bool touches_box = false;
  for (int j = 0; j < p.num_vars(); ++j) {
    if ((std::isinf(p.lo[j]) && first.best_x[j] <= -cfg.box) ||
        (std::isinf(p.hi[j]) && first.best_x[j] >= cfg.box)) {
      touches_box = true;
    }
  }
  if (touches_box) {
    // A finite optimum does not move when the artificial box grows.
    Enumerator second = RunEnumeration(p, 2.0 * cfg.box, cfg.max_evaluations);
    out.evaluations += second.evaluations;
    if (second.best < first.best - 1e-9 * (1.0 + std::abs(first.best))) {
      out.status = OracleStatus::kUnbounded;
      return out;
    }
  }
  out.status = OracleStatus::kOptimal;
  out.obj = first.best;
  out.x = first.best_x;
  return out;
}

// ---------------------------------------------------------------------------
// Merit-order market oracles.

namespace {

double At(const Series& s, int t) { return s[t]; }

void RequireSingleZone(const EnergySystem& sys, const char* who) {
  if (sys.elec_zones.size() != 1 || !sys.lines.empty()) {
    throw ValidationError(std::string(who) +
                          ": only one electricity zone without lines");
  }
}

}  // namespace

MeritOrderResult MeritOrderClear(const EnergySystem& sys, int hour, double load,
                                 const std::vector<double>& e_min,
                                 const std::vector<double>& e_max) {
  RequireSingleZone(sys, "merit_order_clear");
  const int nu = static_cast<int>(sys.units.size());
  struct Offer {
    int unit;
    double lo;
    double hi;
    double cost;
  };
  std::vector<Offer> offers;
  for (int j = 0; j < nu; ++j) {
    const Unit& u = sys.units[j];
    if (const auto* eo = std::get_if<ElecOnlyUnit>(&u.kind)) {
      offers.push_back({j, At(eo->e_min, hour), At(eo->e_max, hour),
                        At(eo->elec_cost, hour)});
    } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      offers.push_back({j, e_min[j], e_max[j], At(chp->elec_cost, hour)});
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      offers.push_back({j, e_min[j], e_max[j], At(hp->elec_cost, hour)});
    }
  }
  MeritOrderResult r;
  r.e.assign(nu, 0.0);
  double residual = load;
  for (const Offer& o : offers) {
    r.e[o.unit] = o.lo;
    residual -= o.lo;
  }
  const double tol = 1e-9 * (1.0 + std::abs(load));
  std::stable_sort(
      offers.begin(), offers.end(),
      [](const Offer& x, const Offer& y) { return x.cost < y.cost; });
  double shed = 0.0;
  double spill = 0.0;
  bool priced = false;
  if (residual < -tol) {
    if (!sys.has_price_limits()) return r;
    spill = residual;
    residual = 0.0;
    r.price = *sys.price_floor;
    priced = true;
  }
  for (const Offer& o : offers) {
    if (priced) break;
    const double room = o.hi - o.lo;
    if (room <= 0.0) continue;
    const double take = std::min(std::max(residual, 0.0), room);
    r.e[o.unit] += take;
    residual -= take;
    if (residual <= tol) {
      r.price = o.cost;
      priced = true;
    }
  }
  if (!priced) {
    if (residual > tol) {
      if (!sys.has_price_limits()) return r;
      shed = residual;
      r.price = *sys.price_cap;
    } else {
      // Load met by must-run output alone; the cheapest flexible offer
      // prices the zone.
      r.price = offers.empty() ? 0.0 : offers.front().cost;
    }
  }
  r.feasible = true;
  for (const Offer& o : offers) r.cost += o.cost * r.e[o.unit];
  if (sys.has_price_limits()) {
    r.cost += *sys.price_cap * shed + *sys.price_floor * spill;
  }
  return r;
}

double LeaderCostAt(const EnergySystem& sys, int hour,
                    const std::vector<double>& h, double price,
                    const std::vector<double>& e) {
  double cost = 0.0;
  for (size_t j = 0; j < sys.units.size(); ++j) {
    const Unit& u = sys.units[j];
    if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
      cost += At(ho->heat_cost, hour) * h[j];
    } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      cost += At(chp->heat_cost, hour) * h[j];
      cost -= (price - At(chp->elec_cost, hour)) * e[j];
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      cost += price / hp->cop * h[j];
    }
  }
  return cost;
}

BilevelOracleResult BilevelGridOracle(const EnergySystem& sys,
                                      const LoadData& loads, int hour,
                                      const OracleConfig& cfg) {
  RequireSingleZone(sys, "bilevel_grid_oracle");
  if (!(cfg.grid_step > 0.0)) {
    throw ValidationError("bilevel_grid_oracle: step > 0 violated");
  }
  const int nu = static_cast<int>(sys.units.size());
  std::vector<int> coupling;
  std::vector<std::vector<double>> grids;
  std::int64_t total = 1;
  for (int j = 0; j < nu; ++j) {
    const Unit& u = sys.units[j];
    double lo = 0.0;
    double hi = 0.0;
    if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      lo = At(chp->h_min, hour);
      hi = At(chp->h_max, hour);
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      lo = At(hp->h_min, hour);
      hi = At(hp->h_max, hour);
    } else {
      continue;
    }
    std::vector<double> g;
    const auto steps =
        static_cast<std::int64_t>(std::floor((hi - lo) / cfg.grid_step + 1e-9));
    for (std::int64_t i = 0; i <= steps; ++i)
      g.push_back(lo + i * cfg.grid_step);
    if (g.back() < hi - 1e-9 * (1.0 + hi)) g.push_back(hi);
    g.back() = std::min(g.back(), hi);
    total *= static_cast<std::int64_t>(g.size());
    if (total > cfg.max_evaluations) {
      throw ValidationError("bilevel_grid_oracle: runtime guard exceeded");
    }
    coupling.push_back(j);
    grids.push_back(std::move(g));
  }
  if (coupling.size() > 3) {
    throw ValidationError("bilevel_grid_oracle: at most 3 CHP/HP units");
  }

  // Heat-only units per zone in merit order.
  const int nh = sys.num_heat_zones();
  std::vector<std::vector<int>> heat_only(nh);
  for (int j = 0; j < nu; ++j) {
    if (const auto* ho = std::get_if<HeatOnlyUnit>(&sys.units[j].kind)) {
      heat_only[sys.HeatZoneIndex(ho->heat_zone)].push_back(j);
    }
  }
  for (auto& list : heat_only) {
    std::stable_sort(list.begin(), list.end(), [&](int x, int y) {
      return At(std::get<HeatOnlyUnit>(sys.units[x].kind).heat_cost, hour) <
             At(std::get<HeatOnlyUnit>(sys.units[y].kind).heat_cost, hour);
    });
  }

  BilevelOracleResult best;
  std::vector<size_t> idx(coupling.size(), 0);
  std::vector<double> h(nu, 0.0);
  std::vector<double> e_min(nu, 0.0);
  std::vector<double> e_max(nu, 0.0);
  while (true) {
    ++best.evaluations;
    std::fill(h.begin(), h.end(), 0.0);
    std::vector<double> need(nh);
    for (int z = 0; z < nh; ++z) need[z] = loads.heat(z, hour);
    for (size_t k = 0; k < coupling.size(); ++k) {
      const int j = coupling[k];
      h[j] = grids[k][idx[k]];
      const Unit& u = sys.units[j];
      if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        need[sys.HeatZoneIndex(chp->heat_zone)] -= h[j];
        e_min[j] = h[j] / chp->r;
        e_max[j] = (chp->fuel_max - chp->rho_h * h[j]) / chp->rho_e;
      } else {
        const auto& hp = std::get<HeatPumpUnit>(u.kind);
        need[sys.HeatZoneIndex(hp.heat_zone)] -= h[j];
        e_min[j] = e_max[j] = -h[j] / hp.cop;
      }
    }
    bool ok = true;
    for (int z = 0; z < nh && ok; ++z) {
      double rest = need[z];
      const double tol = 1e-9 * (1.0 + loads.heat(z, hour));
      for (int j : heat_only[z]) {
        const auto& ho = std::get<HeatOnlyUnit>(sys.units[j].kind);
        h[j] = At(ho.h_min, hour);
        rest -= h[j];
      }
      if (rest < -tol) ok = false;
      for (int j : heat_only[z]) {
        if (rest <= 0.0) break;
        const auto& ho = std::get<HeatOnlyUnit>(sys.units[j].kind);
        const double take = std::min(rest, At(ho.h_max, hour) - h[j]);
        h[j] += take;
        rest -= take;
      }
      if (rest > tol) ok = false;
    }
    for (int j : coupling) {
      if (sys.units[j].is_chp() && e_min[j] > e_max[j]) ok = false;
    }
    if (ok) {
      const MeritOrderResult clear =
          MeritOrderClear(sys, hour, loads.elec(0, hour), e_min, e_max);
      if (clear.feasible) {
        const double obj = LeaderCostAt(sys, hour, h, clear.price, clear.e);
        if (!best.feasible || obj < best.objective) {
          best.feasible = true;
          best.objective = obj;
          best.h = h;
          best.price = clear.price;
        }
      }
    }
    size_t k = 0;
    while (k < idx.size() && ++idx[k] == grids[k].size()) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return best;
}

FidelityOracleResult FidelityGridOracle(const EnergySystem& sys, int hour,
                                        double d_tilde,
                                        const std::vector<double>& e_min,
                                        const std::vector<double>& e_max,
                                        double omega_bar, double lambda_bar,
                                        double eta_p_abs, double eta_d_abs,
                                        double d_max, const OracleConfig& cfg) {
  RequireSingleZone(sys, "fidelity_grid_oracle");
  if (!(cfg.grid_step > 0.0)) {
    throw ValidationError("fidelity_grid_oracle: step > 0 violated");
  }
  const auto steps =
      static_cast<std::int64_t>(std::floor(d_max / cfg.grid_step + 1e-9));
  if (steps + 1 > cfg.max_evaluations) {
    throw ValidationError("fidelity_grid_oracle: runtime guard exceeded");
  }
  FidelityOracleResult best;
  for (std::int64_t i = 0; i <= steps; ++i) {
    const double d = i * cfg.grid_step;
    ++best.evaluations;
    const MeritOrderResult clear = MeritOrderClear(sys, hour, d, e_min, e_max);
    if (!clear.feasible) continue;
    if (std::abs(clear.price - lambda_bar) > eta_d_abs) continue;
    if (std::abs(clear.cost - omega_bar) > eta_p_abs) continue;
    const double dist = (d - d_tilde) * (d - d_tilde);
    if (!best.feasible || dist < best.distance) {
      best.feasible = true;
      best.d_hat = d;
      best.distance = dist;
      best.price = clear.price;
      best.cost = clear.cost;
    }
  }
  return best;
}

}  // namespace dpsc
