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

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dpsc/branchbound.h"
#include "dpsc/common.h"
#include "follower_model.h"

namespace dpsc {

using internal::FollowerHour;
using internal::FollowerLayout;
using internal::Link;
using internal::Offer;
using internal::SeriesAt;

CouplingBounds CouplingBoundsFor(const EnergySystem& sys,
                                 const Eigen::MatrixXd& h) {
  const int nu = static_cast<int>(sys.units.size());
  CouplingBounds b;
  b.e_min = Eigen::MatrixXd::Zero(nu, sys.horizon);
  b.e_max = Eigen::MatrixXd::Zero(nu, sys.horizon);
  for (int j = 0; j < nu; ++j) {
    const Unit& u = sys.units[j];
    for (int t = 0; t < sys.horizon; ++t) {
      ElecBounds eb;
      if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        eb = ChpElecBounds(h(j, t), *chp);
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        eb = HpElecBounds(h(j, t), *hp);
      } else {
        continue;
      }
      b.e_min(j, t) = eb.e_min;
      b.e_max(j, t) = eb.e_max;
    }
  }
  return b;
}

namespace internal {

void ClearHour(const EnergySystem& sys, int t, const CouplingBounds& bounds,
               const Eigen::VectorXd& load_wh, const LpTolerances& tol,
               FollowerOutcome* out) {
  const int nu = static_cast<int>(sys.units.size());
  const int nz = sys.num_elec_zones();
  for (int j = 0; j < nu; ++j) {
    if (!sys.units[j].is_coupling()) continue;
    const double slack = 1e-9 * (1.0 + std::abs(bounds.e_max(j, t)));
    if (bounds.e_min(j, t) > bounds.e_max(j, t) + slack) {
      throw ValidationError(fmt::format(
          "clear_follower: unit {} hour {}: e_min <= e_max violated",
          sys.units[j].id, t));
    }
  }
  const FollowerHour fh = internal::MakeFollowerHour(sys, t, bounds);
  const Eigen::VectorXd load = load_wh / kWhPerMWh;
  LpProblem lp = internal::BuildFollowerLp(fh, load);
  for (int k = 0; k < lp.num_vars(); ++k) {
    if (lp.lo[k] > lp.hi[k]) lp.lo[k] = lp.hi[k];
  }
  const LpSolution s = SolveLp(lp, tol);
  if (s.status == LpStatus::kInfeasible) {
    throw InfeasibleError(internal::BalanceDiagnostic(sys, fh, load));
  }
  if (!s.optimal()) {
    throw SolverError(fmt::format("clear_follower: hour {}: LP status {}", t,
                                  ToString(s.status)));
  }
  const FollowerLayout lay = internal::LayoutOf(fh);
  for (size_t k = 0; k < fh.offers.size(); ++k) {
    out->e(fh.offers[k].unit, t) = ToWh(s.x[k]);
  }
  for (size_t k = 0; k < fh.links.size(); ++k) {
    out->f(fh.links[k].line, t) = ToWh(s.x[lay.first_link + k]);
  }
  if (fh.limits) {
    for (int z = 0; z < nz; ++z) {
      out->shed(z, t) = ToWh(s.x[lay.first_shed + z]);
      out->spill(z, t) = ToWh(s.x[lay.first_spill + z]);
    }
  }
  for (int z = 0; z < nz; ++z) out->lambda(z, t) = ToEurPerWh(s.y[z]);
  out->hourly_cost[t] = s.obj;
}

}  // namespace internal

namespace {

double LeaderCostAt(const EnergySystem& sys, const Eigen::MatrixXd& h,
                    const FollowerOutcome& follower, int t) {
  double cost = 0.0;
  for (size_t j = 0; j < sys.units.size(); ++j) {
    const Unit& u = sys.units[j];
    if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
      cost += SeriesAt(ho->heat_cost, t) * h(j, t);
    } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      const double lambda =
          follower.lambda(sys.ElecZoneIndex(chp->elec_zone), t);
      cost += SeriesAt(chp->heat_cost, t) * h(j, t) -
              (lambda - SeriesAt(chp->elec_cost, t)) * follower.e(j, t);
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      const double lambda =
          follower.lambda(sys.ElecZoneIndex(hp->elec_zone), t);
      cost += lambda / hp->cop * h(j, t);
    }
  }
  return cost;
}

}  // namespace

FollowerOutcome ClearFollower(const EnergySystem& sys,
                              const Eigen::MatrixXd& elec_loads,
                              const CouplingBounds& bounds,
                              const LpTolerances& tol) {
  const int nz = sys.num_elec_zones();
  const int nu = static_cast<int>(sys.units.size());
  const int horizon = sys.horizon;
  if (elec_loads.rows() != nz || elec_loads.cols() != horizon) {
    throw ValidationError("clear_follower: load matrix shape mismatch");
  }
  if (bounds.e_min.rows() != nu || bounds.e_min.cols() != horizon ||
      bounds.e_max.rows() != nu || bounds.e_max.cols() != horizon) {
    throw ValidationError("clear_follower: bounds shape mismatch");
  }
  FollowerOutcome out = internal::EmptyOutcome(sys);
  for (int t = 0; t < horizon; ++t) {
    internal::ClearHour(sys, t, bounds, elec_loads.col(t), tol, &out);
  }
  out.cost = out.hourly_cost.sum();
  return out;
}

Eigen::VectorXd LeaderHourlyCost(const EnergySystem& sys,
                                 const Eigen::MatrixXd& h,
                                 const FollowerOutcome& follower) {
  Eigen::VectorXd cost(sys.horizon);
  for (int t = 0; t < sys.horizon; ++t)
    cost[t] = LeaderCostAt(sys, h, follower, t);
  return cost;
}

// ---------------------------------------------------------------------------
// Leader single-level reformulation.

namespace {

void CheckHeatBalance(const EnergySystem& sys, const Eigen::MatrixXd& heat,
                      int t) {
  for (int z = 0; z < sys.num_heat_zones(); ++z) {
    double lo = 0.0;
    double hi = 0.0;
    for (const Unit& u : sys.units) {
      if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
        if (ho->heat_zone != sys.heat_zones[z]) continue;
        lo += SeriesAt(ho->h_min, t);
        hi += SeriesAt(ho->h_max, t);
      } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        if (chp->heat_zone != sys.heat_zones[z]) continue;
        lo += SeriesAt(chp->h_min, t);
        hi += SeriesAt(chp->h_max, t);
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        if (hp->heat_zone != sys.heat_zones[z]) continue;
        lo += SeriesAt(hp->h_min, t);
        hi += SeriesAt(hp->h_max, t);
      }
    }
    const double load = heat(z, t);
    const double slack = 1e-9 * (1.0 + load);
    if (load < lo - slack || load > hi + slack) {
      throw InfeasibleError(fmt::format(
          "hour {}: heat zone {} balance infeasible, load {:.6g} MWh outside "
          "[{:.6g}, {:.6g}] MWh",
          t, sys.heat_zones[z], ToMWh(load), ToMWh(lo), ToMWh(hi)));
    }
  }
}

struct CouplingVar {
  int unit;
  bool chp;
  int zone;  // electricity zone
  int heat_zone;
  double h_min;  // MWh
  double h_max;
  double delta;  // h_max - h_min
  int h;         // variable indices
  std::vector<int> bits;
  std::vector<int> z;  // McCormick products
  int e = -1;          // CHP electricity
  int mu_min = -1;
  int mu_max = -1;
  int pi = -1;  // CHP: mu_min / R + mu_max rho_H / rho_E
  double r = 1.0;
  double rho_ratio = 0.0;  // rho_H / rho_E
  double fuel_cap = 0.0;   // Fmax / rho_E, MWh
  double cop = 1.0;
  double heat_cost = 0.0;  // EUR/MWh
  double elec_cost = 0.0;
};

struct HourResult {
  Eigen::VectorXd h;  // per unit, Wh
  double milp_cost = 0.0;
  std::int64_t nodes = 0;
  int escalations = 0;
};

class LeaderHour {
 public:
  LeaderHour(const EnergySystem& sys, const LoadData& loads, int t,
             const LeaderOptions& opt)
      : sys_(sys), loads_(loads), t_(t), opt_(opt) {
    CouplingBounds none;
    const int nu = static_cast<int>(sys.units.size());
    none.e_min = Eigen::MatrixXd::Zero(nu, sys.horizon);
    none.e_max = Eigen::MatrixXd::Zero(nu, sys.horizon);
    fh_ = internal::MakeFollowerHour(sys, t, none);
  }

  HourResult Solve() {
    HourResult best;
    for (int esc = 0;; ++esc) {
      const double scale = std::ldexp(1.0, esc);
      Build(scale);
      MipOptions mo;
      mo.gap = opt_.mip_gap;
      mo.node_limit = opt_.node_limit;
      mo.lp = opt_.lp;
      mo.priority = priority_;
      const MipSolution s = SolveMip(mip_, mo);
      best.nodes += s.nodes;
      if (s.status == MipStatus::kInfeasible) {
        if (esc < opt_.max_escalations) continue;
        throw InfeasibleError(fmt::format(
            "hour {}: leader problem infeasible on the {}-bit heat grid", t_,
            opt_.k_bits));
      }
      if (!s.has_incumbent) {
        throw SolverError(fmt::format("hour {}: leader MILP status {}", t_,
                                      ToString(s.status)));
      }
      if (HitsBigM(s.x)) {
        if (esc < opt_.max_escalations) continue;
        throw SolverError(fmt::format(
            "hour {}: dual big-M still binding after {} escalations", t_,
            opt_.max_escalations));
      }
      best.escalations = esc;
      best.milp_cost = s.obj + offset_;
      best.h = Eigen::VectorXd::Zero(sys_.units.size());
      for (const auto& [unit, var] : heat_only_) best.h[unit] = ToWh(s.x[var]);
      const int k = opt_.k_bits;
      const double denom = std::ldexp(1.0, k) - 1.0;
      for (const CouplingVar& c : coupling_) {
        double level = 0.0;
        for (int b = 0; b < k; ++b) {
          level += std::ldexp(1.0, b) * std::round(s.x[c.bits[b]]);
        }
        best.h[c.unit] =
            ToWh(std::min(c.h_max, c.h_min + c.delta * level / denom));
      }
      return best;
    }
  }

 private:
  void Build(double scale) {
    LpBuilder b;
    using Sense = LpBuilder::Sense;
    heat_only_.clear();
    coupling_.clear();
    offset_ = 0.0;
    const int k = opt_.k_bits;
    const double denom = std::ldexp(1.0, k) - 1.0;
    const int nz = fh_.num_zones;

    double lam_lo = 0.0;
    double lam_hi = 0.0;
    double cmin = kInf;
    double cmax = -kInf;
    for (const Unit& u : sys_.units) {
      double c;
      if (const auto* eo = std::get_if<ElecOnlyUnit>(&u.kind)) {
        c = SeriesAt(eo->elec_cost, t_);
      } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        c = SeriesAt(chp->elec_cost, t_);
      } else {
        continue;
      }
      cmin = std::min(cmin, ToEurPerMWh(c));
      cmax = std::max(cmax, ToEurPerMWh(c));
    }
    if (cmin > cmax) cmin = cmax = 0.0;
    const double margin = scale * (2.0 * (cmax - cmin) + 1.0);
    internal::PriceBox(fh_, margin, &lam_lo, &lam_hi);
    lam_lo_ = lam_lo;
    lam_hi_ = lam_hi;
    double mu_cap = 0.0;
    for (double c : {cmin, cmax}) {
      mu_cap = std::max({mu_cap, std::abs(c - lam_lo), std::abs(c - lam_hi)});
    }
    mu_cap = scale * (mu_cap + 1.0);
    const double nu_cap = scale * (lam_hi - lam_lo + 1.0);

    // Heat side.
    std::vector<LpBuilder::Terms> heat_rows(sys_.num_heat_zones());
    for (size_t j = 0; j < sys_.units.size(); ++j) {
      const Unit& u = sys_.units[j];
      const int unit = static_cast<int>(j);
      if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
        const int v = b.AddVar(ToMWh(SeriesAt(ho->h_min, t_)),
                               ToMWh(SeriesAt(ho->h_max, t_)),
                               ToEurPerMWh(SeriesAt(ho->heat_cost, t_)));
        heat_only_.emplace_back(unit, v);
        heat_rows[sys_.HeatZoneIndex(ho->heat_zone)].emplace_back(v, 1.0);
        continue;
      }
      CouplingVar c;
      c.unit = unit;
      if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        c.chp = true;
        c.zone = sys_.ElecZoneIndex(chp->elec_zone);
        c.heat_zone = sys_.HeatZoneIndex(chp->heat_zone);
        c.h_min = ToMWh(SeriesAt(chp->h_min, t_));
        c.h_max = ToMWh(SeriesAt(chp->h_max, t_));
        c.r = chp->r;
        c.rho_ratio = chp->rho_h / chp->rho_e;
        c.fuel_cap = ToMWh(chp->fuel_max / chp->rho_e);
        c.heat_cost = ToEurPerMWh(SeriesAt(chp->heat_cost, t_));
        c.elec_cost = ToEurPerMWh(SeriesAt(chp->elec_cost, t_));
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        c.chp = false;
        c.zone = sys_.ElecZoneIndex(hp->elec_zone);
        c.heat_zone = sys_.HeatZoneIndex(hp->heat_zone);
        c.h_min = ToMWh(SeriesAt(hp->h_min, t_));
        c.h_max = ToMWh(SeriesAt(hp->h_max, t_));
        c.cop = hp->cop;
        c.elec_cost = ToEurPerMWh(SeriesAt(hp->elec_cost, t_));
      } else {
        continue;
      }
      c.delta = c.h_max - c.h_min;
      c.h = b.AddVar(c.h_min, c.h_max, c.chp ? c.heat_cost : lam_lo / c.cop);
      LpBuilder::Terms def{{c.h, 1.0}};
      for (int bit = 0; bit < k; ++bit) {
        const int v = b.AddVar(0.0, 1.0);
        c.bits.push_back(v);
        def.emplace_back(v, -c.delta * std::ldexp(1.0, bit) / denom);
      }
      b.AddRow(def, Sense::kEq, c.h_min);
      heat_rows[c.heat_zone].emplace_back(c.h, 1.0);
      coupling_.push_back(std::move(c));
    }
    for (int z = 0; z < sys_.num_heat_zones(); ++z) {
      b.AddRow(heat_rows[z], Sense::kEq, ToMWh(loads_.heat(z, t_)));
    }

    // Follower primal.
    std::vector<LpBuilder::Terms> balance(nz);
    LpBuilder::Terms primal_obj;
    std::vector<double> load(nz);
    for (int z = 0; z < nz; ++z) load[z] = ToMWh(loads_.elec(z, t_));
    struct EoVar {
      const Offer* offer;
      int e, mu_min, mu_max;
    };
    std::vector<EoVar> eo_vars;
    for (const Offer& o : fh_.offers) {
      const Unit& u = sys_.units[o.unit];
      if (!u.is_elec_only()) continue;
      const int e = b.AddVar(o.lo, o.hi);
      balance[o.zone].emplace_back(e, 1.0);
      primal_obj.emplace_back(e, o.cost);
      eo_vars.push_back({&o, e, -1, -1});
    }
    for (CouplingVar& c : coupling_) {
      if (c.chp) {
        c.e = b.AddVar(0.0, c.fuel_cap);
        balance[c.zone].emplace_back(c.e, 1.0);
        primal_obj.emplace_back(c.e, c.elec_cost);
        b.AddRow({{c.e, 1.0}, {c.h, -1.0 / c.r}}, Sense::kGe, 0.0);
        b.AddRow({{c.e, 1.0}, {c.h, c.rho_ratio}}, Sense::kLe, c.fuel_cap);
      } else {
        balance[c.zone].emplace_back(c.h, -1.0 / c.cop);
      }
    }
    std::vector<int> flow;
    for (const Link& l : fh_.links) {
      const int f = b.AddVar(l.lo, l.hi);
      balance[l.to].emplace_back(f, 1.0);
      balance[l.from].emplace_back(f, -1.0);
      flow.push_back(f);
    }
    if (fh_.limits) {
      for (int z = 0; z < nz; ++z) {
        const int s = b.AddVar(0.0, kInf);
        const int d = b.AddVar(-kInf, 0.0);
        balance[z].emplace_back(s, 1.0);
        balance[z].emplace_back(d, 1.0);
        primal_obj.emplace_back(s, fh_.cap);
        primal_obj.emplace_back(d, fh_.floor);
      }
    }
    for (int z = 0; z < nz; ++z) b.AddRow(balance[z], Sense::kEq, load[z]);

    // Follower dual.
    lambda_.assign(nz, -1);
    for (int z = 0; z < nz; ++z) lambda_[z] = b.AddVar(lam_lo, lam_hi);
    LpBuilder::Terms dual_obj;  // dual objective, linear part
    double dual_const = 0.0;
    for (int z = 0; z < nz; ++z) dual_obj.emplace_back(lambda_[z], load[z]);
    dual_pairs_.clear();
    for (EoVar& v : eo_vars) {
      v.mu_min = b.AddVar(0.0, mu_cap);
      v.mu_max = b.AddVar(0.0, mu_cap);
      b.AddRow(
          {{lambda_[v.offer->zone], 1.0}, {v.mu_min, 1.0}, {v.mu_max, -1.0}},
          Sense::kEq, v.offer->cost);
      dual_obj.emplace_back(v.mu_min, v.offer->lo);
      dual_obj.emplace_back(v.mu_max, -v.offer->hi);
      dual_pairs_.emplace_back(v.mu_min, v.mu_max);
    }
    for (size_t k2 = 0; k2 < fh_.links.size(); ++k2) {
      const Link& l = fh_.links[k2];
      const int nmin = b.AddVar(0.0, std::isinf(l.lo) ? 0.0 : nu_cap);
      const int nmax = b.AddVar(0.0, std::isinf(l.hi) ? 0.0 : nu_cap);
      b.AddRow({{lambda_[l.from], 1.0},
                {lambda_[l.to], -1.0},
                {nmin, -1.0},
                {nmax, 1.0}},
               Sense::kEq, 0.0);
      if (!std::isinf(l.lo)) dual_obj.emplace_back(nmin, l.lo);
      if (!std::isinf(l.hi)) dual_obj.emplace_back(nmax, -l.hi);
      dual_pairs_.emplace_back(nmin, nmax);
    }
    priority_.clear();
    mip_.binaries.clear();
    LpBuilder::Terms leader_extra;
    for (CouplingVar& c : coupling_) {
      double cap;
      int x;  // the dual quantity multiplied by h
      double x_shift = 0.0;
      if (c.chp) {
        c.mu_min = b.AddVar(0.0, mu_cap);
        c.mu_max = b.AddVar(0.0, mu_cap);
        b.AddRow({{lambda_[c.zone], 1.0}, {c.mu_min, 1.0}, {c.mu_max, -1.0}},
                 Sense::kEq, c.elec_cost);
        dual_pairs_.emplace_back(c.mu_min, c.mu_max);
        cap = mu_cap * (1.0 / c.r + c.rho_ratio);
        c.pi = b.AddVar(0.0, cap);
        b.AddRow(
            {{c.pi, 1.0}, {c.mu_min, -1.0 / c.r}, {c.mu_max, -c.rho_ratio}},
            Sense::kEq, 0.0);
        x = c.pi;
        // mu_min e_min - mu_max e_max = pi h - mu_max Fmax / rho_E.
        dual_obj.emplace_back(c.pi, c.h_min);
        dual_obj.emplace_back(c.mu_max, -c.fuel_cap);
        leader_extra.emplace_back(c.pi, c.h_min);
        leader_extra.emplace_back(c.mu_max, -c.fuel_cap);
      } else {
        // lambda h = lam_lo h + (lambda - lam_lo) h_min + (lambda - lam_lo)(h -
        // h_min).
        cap = lam_hi - lam_lo;
        x = lambda_[c.zone];
        x_shift = lam_lo;
        dual_obj.emplace_back(c.h, lam_lo / c.cop);
        dual_obj.emplace_back(lambda_[c.zone], c.h_min / c.cop);
        dual_const -= lam_lo * c.h_min / c.cop;
        leader_extra.emplace_back(lambda_[c.zone], c.h_min / c.cop);
        offset_ -= lam_lo * c.h_min / c.cop;
      }
      const double per = c.chp ? 1.0 : 1.0 / c.cop;
      for (int bit = 0; bit < k; ++bit) {
        const int bv = c.bits[bit];
        const int zv = b.AddVar(0.0, cap);
        c.z.push_back(zv);
        b.AddRow({{zv, 1.0}, {bv, -cap}}, Sense::kLe, 0.0);
        b.AddRow({{zv, 1.0}, {x, -1.0}}, Sense::kLe, -x_shift);
        b.AddRow({{zv, 1.0}, {x, -1.0}, {bv, -cap}}, Sense::kGe,
                 -cap - x_shift);
        const double w = c.delta * std::ldexp(1.0, bit) / denom;
        dual_obj.emplace_back(zv, per * w);
        leader_extra.emplace_back(zv, per * w);
        mip_.binaries.push_back(bv);
        priority_.push_back(bit);
      }
    }
    // Strong duality: primal objective <= dual objective.
    LpBuilder::Terms sd = primal_obj;
    for (const auto& [v, coef] : dual_obj) sd.emplace_back(v, -coef);
    b.AddRow(sd, Sense::kLe, dual_const);

    LpProblem lp = b.Build();
    for (const auto& [v, coef] : leader_extra) lp.c[v] += coef;
    mip_.base = std::move(lp);
  }

  // True when a dual sits at its artificial bound after removing the common
  // part of paired multipliers, which never changes any objective.
  bool HitsBigM(const Eigen::VectorXd& x) const {
    const double tol = 0.999;
    if (!fh_.limits) {
      const double span = lam_hi_ - lam_lo_;
      for (int v : lambda_) {
        if (x[v] <= lam_lo_ + (1.0 - tol) * span ||
            x[v] >= lam_hi_ - (1.0 - tol) * span) {
          return true;
        }
      }
    }
    for (const auto& [a, b] : dual_pairs_) {
      const double common = std::min(x[a], x[b]);
      const double cap = std::max(mip_.base.hi[a], mip_.base.hi[b]);
      if (cap <= 0.0) continue;
      if (std::max(x[a], x[b]) - common >= tol * cap) return true;
    }
    return false;
  }

  const EnergySystem& sys_;
  const LoadData& loads_;
  int t_;
  const LeaderOptions& opt_;
  FollowerHour fh_;
  MipProblem mip_;
  std::vector<int> priority_;
  std::vector<std::pair<int, int>> heat_only_;
  std::vector<CouplingVar> coupling_;
  std::vector<int> lambda_;
  std::vector<std::pair<int, int>> dual_pairs_;
  double offset_ = 0.0;
  double lam_lo_ = 0.0;
  double lam_hi_ = 0.0;
};

// Exact per-hour leader problem by enumeration of zone price vectors. At a
// vertex of the follower dual every zone price equals an offer cost, the
// price cap or the price floor, and once prices are fixed the follower
// optimality conditions are linear in heat and dispatch.
class PriceEnumeration {
 public:
  PriceEnumeration(const EnergySystem& sys, const LoadData& loads, int t,
                   const LeaderOptions& opt)
      : sys_(sys), t_(t), opt_(opt) {
    CouplingBounds none;
    const int nu = static_cast<int>(sys.units.size());
    none.e_min = Eigen::MatrixXd::Zero(nu, sys.horizon);
    none.e_max = Eigen::MatrixXd::Zero(nu, sys.horizon);
    fh_ = internal::MakeFollowerHour(sys, t, none);
    for (const Offer& o : fh_.offers) {
      if (!sys.units[o.unit].is_heat_pump()) prices_.push_back(o.cost);
    }
    if (fh_.limits) {
      prices_.push_back(fh_.cap);
      prices_.push_back(fh_.floor);
    }
    std::sort(prices_.begin(), prices_.end());
    prices_.erase(std::unique(prices_.begin(), prices_.end()), prices_.end());
    Build(loads);
  }

  // Number of price vectors, saturating at `limit` + 1.
  std::int64_t Combinations(std::int64_t limit) const {
    std::int64_t n = 1;
    for (int z = 0; z < fh_.num_zones; ++z) {
      n *= static_cast<std::int64_t>(prices_.size());
      if (n > limit) return limit + 1;
    }
    return n;
  }

  // Price vectors are visited in order of their LP objective. The first
  // whose dispatch survives an exact re-clear bounds all later ones. When
  // the re-clear lands on another dual, the marginal units, shed, spill and
  // uncongested lines are pushed inside their bounds so the price is unique.
  HourResult Solve(const Eigen::VectorXd& load_wh) {
    const int nz = fh_.num_zones;
    const int np = static_cast<int>(prices_.size());
    if (np == 0) {
      throw SolverError(fmt::format("hour {}: no electricity offers", t_));
    }
    SimplexSolver solver(lp_, opt_.lp);
    HourResult best;
    struct Candidate {
      double obj;
      std::vector<int> pick;
    };
    std::vector<Candidate> candidates;
    std::vector<int> pick(nz, 0);
    while (true) {
      const LpSolution s = SolveAt(&solver, pick, 0.0);
      ++best.nodes;
      if (s.optimal()) candidates.push_back({s.obj, pick});
      int z = 0;
      while (z < nz && ++pick[z] == np) pick[z++] = 0;
      if (z == nz) break;
    }
    std::stable_sort(
        candidates.begin(), candidates.end(),
        [](const Candidate& a, const Candidate& b) { return a.obj < b.obj; });
    bool found = false;
    double best_cost = kInf;
    const double margin = opt_.interior_margin * scale_;
    for (const Candidate& cand : candidates) {
      if (found && cand.obj >= best_cost - Tol(best_cost)) break;
      for (const double delta : {0.0, margin}) {
        const LpSolution s = SolveAt(&solver, cand.pick, delta);
        ++best.nodes;
        if (!s.optimal()) continue;
        Eigen::VectorXd h;
        double cost;
        if (!Recleared(s, load_wh, &h, &cost)) continue;
        if (!found || cost < best_cost - Tol(best_cost)) {
          found = true;
          best_cost = cost;
          best.h = h;
          best.milp_cost = s.obj;
        }
        if (cost <= s.obj + Tol(s.obj)) break;
      }
    }
    if (!found) {
      throw InfeasibleError(fmt::format(
          "hour {}: no follower equilibrium meets the heat balance", t_));
    }
    return best;
  }

 private:
  static double Tol(double v) { return 1e-7 * (1.0 + std::abs(v)); }

  LpSolution SolveAt(SimplexSolver* solver, const std::vector<int>& pick,
                     double delta) const {
    std::vector<double> lam(pick.size());
    for (size_t z = 0; z < pick.size(); ++z) lam[z] = prices_[pick[z]];
    Eigen::VectorXd c = lp_.c;
    Eigen::VectorXd lo = lp_.lo;
    Eigen::VectorXd hi = lp_.hi;
    if (!Fix(lam, delta, &c, &lo, &hi)) return LpSolution{};
    solver->SetCost(c);
    solver->SetBounds(lo, hi);
    const LpSolution s = solver->Solve();
    if (s.status == LpStatus::kIterationLimit) {
      throw SolverError(fmt::format(
          "hour {}: leader price-vector LP hit the iteration limit", t_));
    }
    return s;
  }

  // Heat dispatch of `s` and the leader cost after an exact follower clear.
  bool Recleared(const LpSolution& s, const Eigen::VectorXd& load_wh,
                 Eigen::VectorXd* h, double* cost) const {
    const int nu = static_cast<int>(sys_.units.size());
    Eigen::MatrixXd hm = Eigen::MatrixXd::Zero(nu, sys_.horizon);
    for (const auto& [unit, var] : heat_) {
      hm(unit, t_) = ToWh(std::clamp(s.x[var], lp_.lo[var], lp_.hi[var]));
    }
    FollowerOutcome f = internal::EmptyOutcome(sys_);
    try {
      internal::ClearHour(sys_, t_, CouplingBoundsFor(sys_, hm), load_wh,
                          opt_.lp, &f);
    } catch (const InfeasibleError&) {
      return false;
    }
    *h = hm.col(t_);
    *cost = LeaderCostAt(sys_, hm, f, t_);
    return true;
  }

  struct ChpRows {
    int e, h, zone;
    int lo_slack, hi_slack;  // e >= h / R and e + rho h <= Fmax / rho_E
    double elec_cost;
  };
  struct HpVar {
    int h, zone;
    double cop;
  };

  void Build(const LoadData& loads) {
    using Sense = LpBuilder::Sense;
    LpBuilder b;
    const int nz = fh_.num_zones;
    std::vector<LpBuilder::Terms> heat_rows(sys_.num_heat_zones());
    std::vector<LpBuilder::Terms> balance(nz);
    std::vector<std::pair<int, int>> chp_rows;
    for (size_t j = 0; j < sys_.units.size(); ++j) {
      const Unit& u = sys_.units[j];
      const int unit = static_cast<int>(j);
      if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
        const int v = b.AddVar(ToMWh(SeriesAt(ho->h_min, t_)),
                               ToMWh(SeriesAt(ho->h_max, t_)),
                               ToEurPerMWh(SeriesAt(ho->heat_cost, t_)));
        heat_.emplace_back(unit, v);
        heat_rows[sys_.HeatZoneIndex(ho->heat_zone)].emplace_back(v, 1.0);
      } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        const int h = b.AddVar(ToMWh(SeriesAt(chp->h_min, t_)),
                               ToMWh(SeriesAt(chp->h_max, t_)),
                               ToEurPerMWh(SeriesAt(chp->heat_cost, t_)));
        const double fuel_cap = ToMWh(chp->fuel_max / chp->rho_e);
        const int e = b.AddVar(0.0, fuel_cap);
        heat_.emplace_back(unit, h);
        heat_rows[sys_.HeatZoneIndex(chp->heat_zone)].emplace_back(h, 1.0);
        const int zone = sys_.ElecZoneIndex(chp->elec_zone);
        balance[zone].emplace_back(e, 1.0);
        const int r1 =
            b.AddRow({{e, 1.0}, {h, -1.0 / chp->r}}, Sense::kGe, 0.0);
        const int r2 = b.AddRow({{e, 1.0}, {h, chp->rho_h / chp->rho_e}},
                                Sense::kLe, fuel_cap);
        chp_.push_back(
            {e, h, zone, r1, r2, ToEurPerMWh(SeriesAt(chp->elec_cost, t_))});
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        const int h = b.AddVar(ToMWh(SeriesAt(hp->h_min, t_)),
                               ToMWh(SeriesAt(hp->h_max, t_)));
        heat_.emplace_back(unit, h);
        heat_rows[sys_.HeatZoneIndex(hp->heat_zone)].emplace_back(h, 1.0);
        const int zone = sys_.ElecZoneIndex(hp->elec_zone);
        balance[zone].emplace_back(h, -1.0 / hp->cop);
        hp_.push_back({h, zone, hp->cop});
      } else {
        const auto& eo = std::get<ElecOnlyUnit>(u.kind);
        const int zone = sys_.ElecZoneIndex(eo.elec_zone);
        const int e = b.AddVar(ToMWh(SeriesAt(eo.e_min, t_)),
                               ToMWh(SeriesAt(eo.e_max, t_)));
        balance[zone].emplace_back(e, 1.0);
        offers_.push_back({e, zone, ToEurPerMWh(SeriesAt(eo.elec_cost, t_))});
      }
    }
    for (const Link& l : fh_.links) {
      const int f = b.AddVar(l.lo, l.hi);
      balance[l.to].emplace_back(f, 1.0);
      balance[l.from].emplace_back(f, -1.0);
      links_.push_back({f, l.from, l.to});
    }
    if (fh_.limits) {
      for (int z = 0; z < nz; ++z) {
        const int s = b.AddVar(0.0, kInf);
        const int d = b.AddVar(-kInf, 0.0);
        balance[z].emplace_back(s, 1.0);
        balance[z].emplace_back(d, 1.0);
        shed_.push_back(s);
        spill_.push_back(d);
      }
    }
    for (int z = 0; z < sys_.num_heat_zones(); ++z) {
      b.AddRow(heat_rows[z], Sense::kEq, ToMWh(loads.heat(z, t_)));
    }
    for (int z = 0; z < nz; ++z) {
      b.AddRow(balance[z], Sense::kEq, ToMWh(loads.elec(z, t_)));
    }
    for (ChpRows& c : chp_) {
      c.lo_slack = b.slack_of(c.lo_slack);
      c.hi_slack = b.slack_of(c.hi_slack);
    }
    lp_ = b.Build();
    for (int v = 0; v < lp_.num_vars(); ++v) {
      for (double x : {lp_.lo[v], lp_.hi[v]}) {
        if (std::isfinite(x)) scale_ = std::max(scale_, std::abs(x));
      }
    }
  }

  // Follower optimality at prices `lam`: units cheaper than the price run
  // at their upper bound, dearer ones at their lower bound, flows follow the
  // price difference, and shed or spill only at the cap or floor. With
  // delta > 0 everything priced exactly at `lam` keeps that distance from
  // its bounds. Returns false when a bound pair crosses.
  bool Fix(const std::vector<double>& lam, double delta, Eigen::VectorXd* c,
           Eigen::VectorXd* lo, Eigen::VectorXd* hi) const {
    auto pin = [&](int v, double cost, double price) {
      if (cost < price) (*lo)[v] = (*hi)[v];
      if (cost > price) (*hi)[v] = (*lo)[v];
      if (cost == price && (*lo)[v] < (*hi)[v]) {
        (*lo)[v] += delta;
        (*hi)[v] -= delta;
      }
    };
    for (const OfferVar& o : offers_) pin(o.e, o.cost, lam[o.zone]);
    for (const ChpRows& ch : chp_) {
      const double price = lam[ch.zone];
      (*c)[ch.e] = ch.elec_cost - price;
      // Pinning a slack to zero makes the bound on e active.
      if (ch.elec_cost < price) (*lo)[ch.hi_slack] = (*hi)[ch.hi_slack] = 0.0;
      if (ch.elec_cost > price) (*lo)[ch.lo_slack] = (*hi)[ch.lo_slack] = 0.0;
      if (ch.elec_cost == price) {
        (*lo)[ch.hi_slack] = delta;
        (*hi)[ch.lo_slack] = -delta;
      }
    }
    for (const HpVar& hp : hp_) (*c)[hp.h] = lam[hp.zone] / hp.cop;
    for (const LinkVar& l : links_) {
      pin(l.f, lam[l.from], lam[l.to]);
    }
    for (size_t z = 0; z < shed_.size(); ++z) {
      if (lam[z] == fh_.cap) {
        (*lo)[shed_[z]] = delta;
      } else {
        (*hi)[shed_[z]] = 0.0;
      }
      if (lam[z] == fh_.floor) {
        (*hi)[spill_[z]] = -delta;
      } else {
        (*lo)[spill_[z]] = 0.0;
      }
    }
    for (int v = 0; v < lo->size(); ++v) {
      if ((*lo)[v] > (*hi)[v]) return false;
    }
    return true;
  }

  struct OfferVar {
    int e, zone;
    double cost;
  };
  struct LinkVar {
    int f, from, to;
  };

  const EnergySystem& sys_;
  int t_;
  const LeaderOptions& opt_;
  FollowerHour fh_;
  std::vector<double> prices_;
  LpProblem lp_;
  std::vector<std::pair<int, int>> heat_;
  std::vector<OfferVar> offers_;
  std::vector<ChpRows> chp_;
  std::vector<HpVar> hp_;
  std::vector<LinkVar> links_;
  std::vector<int> shed_;
  std::vector<int> spill_;
  double scale_ = 1.0;  // largest finite bound, MWh
};

// Slope bound of the leader cost in each CHP/HP heat output, times the grid
// step, at the re-cleared prices.
double DiscretizationGap(const EnergySystem& sys, int k_bits,
                         const FollowerOutcome& follower,
                         const std::vector<bool>& gridded) {
  const double denom = std::ldexp(1.0, k_bits) - 1.0;
  double gap = 0.0;
  for (int t = 0; t < sys.horizon; ++t) {
    if (!gridded[t]) continue;
    for (const Unit& u : sys.units) {
      std::string heat_zone;
      double slope = 0.0;
      double span = 0.0;
      if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        const double lambda =
            follower.lambda(sys.ElecZoneIndex(chp->elec_zone), t);
        slope = SeriesAt(chp->heat_cost, t) +
                std::abs(lambda - SeriesAt(chp->elec_cost, t)) *
                    std::max(1.0 / chp->r, chp->rho_h / chp->rho_e);
        span = SeriesAt(chp->h_max, t) - SeriesAt(chp->h_min, t);
        heat_zone = chp->heat_zone;
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        const double lambda =
            follower.lambda(sys.ElecZoneIndex(hp->elec_zone), t);
        slope = std::abs(lambda) / hp->cop;
        span = SeriesAt(hp->h_max, t) - SeriesAt(hp->h_min, t);
        heat_zone = hp->heat_zone;
      } else {
        continue;
      }
      double heat_only_cost = 0.0;
      for (const Unit& v : sys.units) {
        if (const auto* ho = std::get_if<HeatOnlyUnit>(&v.kind)) {
          if (ho->heat_zone != heat_zone) continue;
          heat_only_cost =
              std::max(heat_only_cost, std::abs(SeriesAt(ho->heat_cost, t)));
        }
      }
      gap += (slope + heat_only_cost) * span / denom;
    }
  }
  return gap;
}

}  // namespace

LeaderOutcome SolveLeaderBilevel(const EnergySystem& sys, const LoadData& loads,
                                 const LeaderOptions& opt) {
  if (opt.k_bits < 1 || opt.k_bits > 20) {
    throw ValidationError("solve_leader_bilevel: 1 <= k_bits <= 20 required");
  }
  if (loads.elec.rows() != sys.num_elec_zones() ||
      loads.elec.cols() != sys.horizon ||
      loads.heat.rows() != sys.num_heat_zones() ||
      loads.heat.cols() != sys.horizon) {
    throw ValidationError("solve_leader_bilevel: load matrix shape mismatch");
  }
  const int nu = static_cast<int>(sys.units.size());
  LeaderOutcome out;
  out.h = Eigen::MatrixXd::Zero(nu, sys.horizon);
  std::vector<bool> gridded(sys.horizon, true);
  for (int t = 0; t < sys.horizon; ++t) {
    CheckHeatBalance(sys, loads.heat, t);
    HourResult r;
    if (opt.method == LeaderMethod::kPriceEnumeration) {
      PriceEnumeration hour(sys, loads, t, opt);
      if (hour.Combinations(opt.max_price_vectors) <= opt.max_price_vectors) {
        r = hour.Solve(loads.elec.col(t));
        gridded[t] = false;
      }
    }
    if (gridded[t]) r = LeaderHour(sys, loads, t, opt).Solve();
    out.h.col(t) = r.h;
    out.milp_cost += r.milp_cost;
    out.nodes += r.nodes;
    out.escalations = std::max(out.escalations, r.escalations);
  }
  out.bounds = CouplingBoundsFor(sys, out.h);
  out.follower = ClearFollower(sys, loads.elec, out.bounds, opt.lp);
  out.hourly_cost = LeaderHourlyCost(sys, out.h, out.follower);
  out.cost = out.hourly_cost.sum();
  out.discretization_gap =
      DiscretizationGap(sys, opt.k_bits, out.follower, gridded);
  return out;
}

// ---------------------------------------------------------------------------
// Decoupled heat market and prediction models.

namespace {

DecoupledHeat SolveHeatLp(const EnergySystem& sys,
                          const Eigen::MatrixXd& heat_loads,
                          const Eigen::MatrixXd* lambda,
                          const LpTolerances& tol) {
  if (heat_loads.rows() != sys.num_heat_zones() ||
      heat_loads.cols() != sys.horizon) {
    throw ValidationError("decoupled heat: heat load shape mismatch");
  }
  if (lambda != nullptr &&
      (lambda->rows() != sys.num_elec_zones() ||
       lambda->cols() != sys.horizon || !lambda->allFinite())) {
    throw ValidationError("decoupled heat: price matrix must be finite");
  }
  const int nu = static_cast<int>(sys.units.size());
  DecoupledHeat out;
  out.h = Eigen::MatrixXd::Zero(nu, sys.horizon);
  out.e = Eigen::MatrixXd::Zero(nu, sys.horizon);
  for (int t = 0; t < sys.horizon; ++t) {
    CheckHeatBalance(sys, heat_loads, t);
    LpBuilder b;
    using Sense = LpBuilder::Sense;
    std::vector<LpBuilder::Terms> rows(sys.num_heat_zones());
    std::vector<std::pair<int, int>> hvar;
    std::vector<std::pair<int, int>> evar;
    for (int j = 0; j < nu; ++j) {
      const Unit& u = sys.units[j];
      if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
        const int v = b.AddVar(ToMWh(SeriesAt(ho->h_min, t)),
                               ToMWh(SeriesAt(ho->h_max, t)),
                               ToEurPerMWh(SeriesAt(ho->heat_cost, t)));
        rows[sys.HeatZoneIndex(ho->heat_zone)].emplace_back(v, 1.0);
        hvar.emplace_back(j, v);
      } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        const int v = b.AddVar(ToMWh(SeriesAt(chp->h_min, t)),
                               ToMWh(SeriesAt(chp->h_max, t)),
                               ToEurPerMWh(SeriesAt(chp->heat_cost, t)));
        rows[sys.HeatZoneIndex(chp->heat_zone)].emplace_back(v, 1.0);
        hvar.emplace_back(j, v);
        if (lambda != nullptr) {
          const double price =
              ToEurPerMWh((*lambda)(sys.ElecZoneIndex(chp->elec_zone), t));
          const double cap = ToMWh(chp->fuel_max / chp->rho_e);
          const int e = b.AddVar(
              0.0, cap, -(price - ToEurPerMWh(SeriesAt(chp->elec_cost, t))));
          b.AddRow({{e, 1.0}, {v, -1.0 / chp->r}}, Sense::kGe, 0.0);
          b.AddRow({{e, 1.0}, {v, chp->rho_h / chp->rho_e}}, Sense::kLe, cap);
          evar.emplace_back(j, e);
        }
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        const double price =
            lambda != nullptr
                ? ToEurPerMWh((*lambda)(sys.ElecZoneIndex(hp->elec_zone), t))
                : ToEurPerMWh(SeriesAt(hp->elec_cost, t));
        const int v = b.AddVar(ToMWh(SeriesAt(hp->h_min, t)),
                               ToMWh(SeriesAt(hp->h_max, t)), price / hp->cop);
        rows[sys.HeatZoneIndex(hp->heat_zone)].emplace_back(v, 1.0);
        hvar.emplace_back(j, v);
      }
    }
    for (int z = 0; z < sys.num_heat_zones(); ++z) {
      b.AddRow(rows[z], Sense::kEq, ToMWh(heat_loads(z, t)));
    }
    const LpSolution s = SolveLp(b.Build(), tol);
    if (s.status == LpStatus::kInfeasible) {
      throw InfeasibleError(
          fmt::format("hour {}: decoupled heat market infeasible", t));
    }
    if (!s.optimal()) {
      throw SolverError(fmt::format("hour {}: decoupled heat LP status {}", t,
                                    ToString(s.status)));
    }
    for (const auto& [j, v] : hvar) out.h(j, t) = ToWh(s.x[v]);
    for (const auto& [j, v] : evar) out.e(j, t) = ToWh(s.x[v]);
    out.cost += s.obj;
  }
  // Clamp roundoff so the bound algebra sees in-range heat.
  for (int j = 0; j < nu; ++j) {
    const Unit& u = sys.units[j];
    for (int t = 0; t < sys.horizon; ++t) {
      if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
        out.h(j, t) = std::clamp(out.h(j, t), SeriesAt(chp->h_min, t),
                                 SeriesAt(chp->h_max, t));
      } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
        out.h(j, t) = std::clamp(out.h(j, t), SeriesAt(hp->h_min, t),
                                 SeriesAt(hp->h_max, t));
      }
    }
  }
  out.bounds = CouplingBoundsFor(sys, out.h);
  return out;
}

}  // namespace

DecoupledHeat SolveDecoupledHeat(const EnergySystem& sys,
                                 const Eigen::MatrixXd& heat_loads,
                                 const Eigen::MatrixXd& lambda,
                                 const LpTolerances& tol) {
  return SolveHeatLp(sys, heat_loads, &lambda, tol);
}

DecoupledHeat SolveBaselineHeat(const EnergySystem& sys,
                                const Eigen::MatrixXd& heat_loads,
                                const LpTolerances& tol) {
  return SolveHeatLp(sys, heat_loads, nullptr, tol);
}

PricePrediction PredictLeaderPrices(const EnergySystem& sys,
                                    const Eigen::MatrixXd& heat_loads,
                                    const Eigen::MatrixXd& d_tilde,
                                    const PredictOptions& opt) {
  if (opt.iter_max < 1 || !(opt.tol_fp > 0.0)) {
    throw ValidationError("predict_leader_prices: iter_max >= 1, tol_fp > 0");
  }
  PricePrediction out;
  const DecoupledHeat base = SolveBaselineHeat(sys, heat_loads, opt.lp);
  out.lambda = ClearFollower(sys, d_tilde, base.bounds, opt.lp).lambda;
  out.iterations = 1;
  out.last_change = kInf;
  DecoupledHeat heat = SolveDecoupledHeat(sys, heat_loads, out.lambda, opt.lp);
  while (out.iterations < opt.iter_max) {
    const Eigen::MatrixXd next =
        ClearFollower(sys, d_tilde, heat.bounds, opt.lp).lambda;
    out.last_change = (next - out.lambda).cwiseAbs().maxCoeff();
    out.lambda = next;
    ++out.iterations;
    heat = SolveDecoupledHeat(sys, heat_loads, out.lambda, opt.lp);
    if (out.last_change < opt.tol_fp) {
      out.converged = true;
      break;
    }
  }
  out.bounds = heat.bounds;
  return out;
}

FollowerPrediction PredictFollower(const EnergySystem& sys,
                                   const Eigen::MatrixXd& d_tilde,
                                   const CouplingBounds& bounds,
                                   const LpTolerances& tol) {
  const FollowerOutcome clear = ClearFollower(sys, d_tilde, bounds, tol);
  FollowerPrediction out;
  out.cost = clear.cost;
  out.hourly_cost = clear.hourly_cost;
  out.lambda = clear.lambda;
  return out;
}

}  // namespace dpsc
