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

#include "follower_model.h"

#include <algorithm>

#include <fmt/format.h>

#include "dpsc/common.h"

namespace dpsc::internal {

double SeriesAt(const Series& s, int t) { return s[t]; }

FollowerHour MakeFollowerHour(const EnergySystem& sys, int hour,
                              const CouplingBounds& bounds) {
  FollowerHour fh;
  fh.hour = hour;
  fh.num_zones = sys.num_elec_zones();
  for (size_t j = 0; j < sys.units.size(); ++j) {
    const Unit& u = sys.units[j];
    const int row = static_cast<int>(j);
    if (const auto* eo = std::get_if<ElecOnlyUnit>(&u.kind)) {
      fh.offers.push_back({row, sys.ElecZoneIndex(eo->elec_zone),
                           ToMWh(SeriesAt(eo->e_min, hour)),
                           ToMWh(SeriesAt(eo->e_max, hour)),
                           ToEurPerMWh(SeriesAt(eo->elec_cost, hour))});
    } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      fh.offers.push_back({row, sys.ElecZoneIndex(chp->elec_zone),
                           ToMWh(bounds.e_min(row, hour)),
                           ToMWh(bounds.e_max(row, hour)),
                           ToEurPerMWh(SeriesAt(chp->elec_cost, hour))});
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      fh.offers.push_back({row, sys.ElecZoneIndex(hp->elec_zone),
                           ToMWh(bounds.e_min(row, hour)),
                           ToMWh(bounds.e_max(row, hour)),
                           ToEurPerMWh(SeriesAt(hp->elec_cost, hour))});
    }
  }
  for (size_t l = 0; l < sys.lines.size(); ++l) {
    const TransmissionLine& line = sys.lines[l];
    fh.links.push_back({static_cast<int>(l), sys.ElecZoneIndex(line.from_zone),
                        sys.ElecZoneIndex(line.to_zone),
                        ToMWh(SeriesAt(line.tc_min, hour)),
                        ToMWh(SeriesAt(line.tc_max, hour))});
  }
  if (sys.has_price_limits()) {
    fh.limits = true;
    fh.cap = ToEurPerMWh(*sys.price_cap);
    fh.floor = ToEurPerMWh(*sys.price_floor);
  }
  return fh;
}

FollowerLayout LayoutOf(const FollowerHour& fh) {
  FollowerLayout lay;
  lay.first_link = static_cast<int>(fh.offers.size());
  lay.num_vars = lay.first_link + static_cast<int>(fh.links.size());
  if (fh.limits) {
    lay.first_shed = lay.num_vars;
    lay.first_spill = lay.first_shed + fh.num_zones;
    lay.num_vars = lay.first_spill + fh.num_zones;
  }
  return lay;
}

LpProblem BuildFollowerLp(const FollowerHour& fh, const Eigen::VectorXd& load) {
  const FollowerLayout lay = LayoutOf(fh);
  LpProblem p;
  p.c = Eigen::VectorXd::Zero(lay.num_vars);
  p.lo.resize(lay.num_vars);
  p.hi.resize(lay.num_vars);
  p.a = Eigen::MatrixXd::Zero(fh.num_zones, lay.num_vars);
  p.b = load;
  for (size_t k = 0; k < fh.offers.size(); ++k) {
    const Offer& o = fh.offers[k];
    p.c[k] = o.cost;
    p.lo[k] = o.lo;
    p.hi[k] = o.hi;
    p.a(o.zone, k) = 1.0;
  }
  for (size_t k = 0; k < fh.links.size(); ++k) {
    const Link& l = fh.links[k];
    const int v = lay.first_link + static_cast<int>(k);
    p.lo[v] = l.lo;
    p.hi[v] = l.hi;
    p.a(l.to, v) += 1.0;
    p.a(l.from, v) -= 1.0;
  }
  if (fh.limits) {
    for (int z = 0; z < fh.num_zones; ++z) {
      const int s = lay.first_shed + z;
      const int d = lay.first_spill + z;
      p.c[s] = fh.cap;
      p.lo[s] = 0.0;
      p.hi[s] = kInf;
      p.a(z, s) = 1.0;
      p.c[d] = fh.floor;
      p.lo[d] = -kInf;
      p.hi[d] = 0.0;
      p.a(z, d) = 1.0;
    }
  }
  return p;
}

std::string BalanceDiagnostic(const EnergySystem& sys, const FollowerHour& fh,
                              const Eigen::VectorXd& load) {
  std::vector<double> lo(fh.num_zones, 0.0);
  std::vector<double> hi(fh.num_zones, 0.0);
  double total_lo = 0.0;
  double total_hi = 0.0;
  for (const Offer& o : fh.offers) {
    lo[o.zone] += o.lo;
    hi[o.zone] += o.hi;
    total_lo += o.lo;
    total_hi += o.hi;
  }
  for (const Link& l : fh.links) {
    lo[l.to] += l.lo;
    hi[l.to] += l.hi;
    lo[l.from] -= l.hi;
    hi[l.from] -= l.lo;
  }
  for (int z = 0; z < fh.num_zones; ++z) {
    if (load[z] < lo[z] || load[z] > hi[z]) {
      return fmt::format(
          "hour {}: zone {} balance infeasible, load {:.6g} MWh outside "
          "deliverable range [{:.6g}, {:.6g}] MWh",
          fh.hour, sys.elec_zones[z], load[z], lo[z], hi[z]);
    }
  }
  const double total = load.sum();
  if (total < total_lo || total > total_hi) {
    return fmt::format(
        "hour {}: system balance infeasible, load {:.6g} MWh outside "
        "[{:.6g}, {:.6g}] MWh",
        fh.hour, total, total_lo, total_hi);
  }
  return fmt::format(
      "hour {}: balance infeasible under combined line and unit limits",
      fh.hour);
}

void PriceBox(const FollowerHour& fh, double margin, double* lo, double* hi) {
  if (fh.limits) {
    *lo = fh.floor;
    *hi = fh.cap;
    return;
  }
  double cmin = 0.0;
  double cmax = 0.0;
  if (!fh.offers.empty()) {
    cmin = kInf;
    cmax = -kInf;
    for (const Offer& o : fh.offers) {
      cmin = std::min(cmin, o.cost);
      cmax = std::max(cmax, o.cost);
    }
  }
  *lo = cmin - margin;
  *hi = cmax + margin;
}

FollowerOutcome EmptyOutcome(const EnergySystem& sys) {
  const int nz = sys.num_elec_zones();
  FollowerOutcome out;
  out.e = Eigen::MatrixXd::Zero(sys.units.size(), sys.horizon);
  out.f = Eigen::MatrixXd::Zero(sys.lines.size(), sys.horizon);
  out.lambda = Eigen::MatrixXd::Zero(nz, sys.horizon);
  out.shed = Eigen::MatrixXd::Zero(nz, sys.horizon);
  out.spill = Eigen::MatrixXd::Zero(nz, sys.horizon);
  out.hourly_cost = Eigen::VectorXd::Zero(sys.horizon);
  return out;
}

}  // namespace dpsc::internal
