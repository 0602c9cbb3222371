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

#include "dpsc/sysmodel.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "dpsc/common.h"
#include "dpsc/rng.h"

namespace dpsc {
namespace {

[[noreturn]] void Fail(const std::string& msg) { throw ValidationError(msg); }

void CheckSeries(const Series& s, int horizon, const std::string& what,
                 const std::string& owner) {
  if (static_cast<int>(s.size()) != horizon) {
    Fail(fmt::format("{}: {} has {} entries, horizon is {}", owner, what,
                     s.size(), horizon));
  }
  for (double v : s) {
    if (!std::isfinite(v)) Fail(fmt::format("{}: {} not finite", owner, what));
  }
}

void CheckOrdered(const Series& lo, const Series& hi, const std::string& what,
                  const std::string& owner) {
  for (size_t t = 0; t < lo.size(); ++t) {
    if (lo[t] > hi[t]) {
      Fail(fmt::format("{}: {} violated at hour {}", owner, what, t));
    }
  }
}

void CheckNonNegative(const Series& s, const std::string& what,
                      const std::string& owner) {
  for (size_t t = 0; t < s.size(); ++t) {
    if (s[t] < 0.0) {
      Fail(fmt::format("{}: {} >= 0 violated at hour {}", owner, what, t));
    }
  }
}

int FindZone(const std::vector<std::string>& zones, const std::string& id) {
  auto it = std::find(zones.begin(), zones.end(), id);
  return it == zones.end() ? -1 : static_cast<int>(it - zones.begin());
}

void CheckZoneList(const std::vector<std::string>& zones,
                   const std::string& kind, bool allow_empty) {
  if (zones.empty() && !allow_empty) {
    Fail(kind + " zones: at least one zone required");
  }
  std::set<std::string> seen;
  for (const auto& z : zones) {
    if (!seen.insert(z).second) Fail(kind + " zone " + z + ": duplicate id");
  }
}

}  // namespace

int EnergySystem::ElecZoneIndex(const std::string& zone) const {
  return FindZone(elec_zones, zone);
}

int EnergySystem::HeatZoneIndex(const std::string& zone) const {
  return FindZone(heat_zones, zone);
}

void EnergySystem::Validate() const {
  if (horizon < 1) Fail("horizon >= 1 violated");
  CheckZoneList(elec_zones, "electricity", false);
  CheckZoneList(heat_zones, "heat", true);
  const int h = horizon;
  std::set<std::string> ids;
  std::vector<bool> heat_only_seen(heat_zones.size(), false);
  for (const Unit& u : units) {
    const std::string owner = "unit " + u.id;
    if (u.id.empty()) Fail("unit with empty id");
    if (!ids.insert(u.id).second) Fail(owner + ": duplicate id");
    auto need_heat = [&](const std::string& z) {
      const int k = HeatZoneIndex(z);
      if (k < 0) Fail(owner + ": unknown heat zone '" + z + "'");
      return k;
    };
    auto need_elec = [&](const std::string& z) {
      if (ElecZoneIndex(z) < 0) {
        Fail(owner + ": unknown electricity zone '" + z + "'");
      }
    };
    if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
      heat_only_seen[need_heat(ho->heat_zone)] = true;
      CheckSeries(ho->h_min, h, "Hmin", owner);
      CheckSeries(ho->h_max, h, "Hmax", owner);
      CheckSeries(ho->heat_cost, h, "C^H", owner);
      CheckNonNegative(ho->h_min, "Hmin", owner);
      CheckOrdered(ho->h_min, ho->h_max, "Hmin <= Hmax", owner);
    } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      need_heat(chp->heat_zone);
      need_elec(chp->elec_zone);
      if (!(chp->rho_e > 0.0)) Fail(owner + ": rho_E > 0 violated");
      if (!(chp->rho_h >= 0.0)) Fail(owner + ": rho_H >= 0 violated");
      if (!(chp->fuel_max > 0.0)) Fail(owner + ": Fmax > 0 violated");
      if (!(chp->r > 0.0)) Fail(owner + ": R > 0 violated");
      CheckSeries(chp->h_min, h, "Hmin", owner);
      CheckSeries(chp->h_max, h, "Hmax", owner);
      CheckSeries(chp->heat_cost, h, "C^H", owner);
      CheckSeries(chp->elec_cost, h, "C^E", owner);
      CheckNonNegative(chp->h_min, "Hmin", owner);
      CheckOrdered(chp->h_min, chp->h_max, "Hmin <= Hmax", owner);
      const double cap = ChpMaxConsistentHeat(*chp);
      for (int t = 0; t < h; ++t) {
        if (chp->h_max[t] > cap * (1.0 + 1e-12)) {
          Fail(fmt::format(
              "{}: Hmax <= Fmax/(rho_E/R + rho_H) violated at hour {} "
              "(e_min would exceed e_max)",
              owner, t));
        }
      }
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      need_heat(hp->heat_zone);
      need_elec(hp->elec_zone);
      if (!(hp->cop > 0.0)) Fail(owner + ": COP > 0 violated");
      CheckSeries(hp->h_min, h, "Hmin", owner);
      CheckSeries(hp->h_max, h, "Hmax", owner);
      CheckSeries(hp->elec_cost, h, "C^E", owner);
      CheckNonNegative(hp->h_min, "Hmin", owner);
      CheckOrdered(hp->h_min, hp->h_max, "Hmin <= Hmax", owner);
    } else {
      const auto& eo = std::get<ElecOnlyUnit>(u.kind);
      need_elec(eo.elec_zone);
      CheckSeries(eo.e_min, h, "Emin", owner);
      CheckSeries(eo.e_max, h, "Emax", owner);
      CheckSeries(eo.elec_cost, h, "C^E", owner);
      CheckOrdered(eo.e_min, eo.e_max, "Emin <= Emax", owner);
    }
  }
  for (size_t k = 0; k < heat_zones.size(); ++k) {
    if (!heat_only_seen[k]) {
      Fail("heat zone " + heat_zones[k] +
           ": at least one continuous heat-only unit required");
    }
  }
  std::set<std::string> line_ids;
  for (const TransmissionLine& l : lines) {
    const std::string owner = "line " + l.id;
    if (!line_ids.insert(l.id).second) Fail(owner + ": duplicate id");
    if (ElecZoneIndex(l.from_zone) < 0) {
      Fail(owner + ": unknown electricity zone '" + l.from_zone + "'");
    }
    if (ElecZoneIndex(l.to_zone) < 0) {
      Fail(owner + ": unknown electricity zone '" + l.to_zone + "'");
    }
    if (l.from_zone == l.to_zone)
      Fail(owner + ": from_zone != to_zone violated");
    CheckSeries(l.tc_min, h, "TCmin", owner);
    CheckSeries(l.tc_max, h, "TCmax", owner);
    CheckOrdered(l.tc_min, l.tc_max, "TCmin <= TCmax", owner);
  }
  if (price_cap.has_value() != price_floor.has_value()) {
    Fail("price_cap and price_floor must be given together");
  }
  if (has_price_limits()) {
    if (!std::isfinite(*price_cap) || !std::isfinite(*price_floor) ||
        !(*price_floor < *price_cap)) {
      Fail("price_floor < price_cap violated");
    }
  }
  if (forecast.has_value()) {
    if (forecast->elec.rows() != num_elec_zones() ||
        forecast->elec.cols() != horizon) {
      Fail("forecast: shape must be elec zones x horizon");
    }
    if (!forecast->elec.allFinite()) Fail("forecast: entries not finite");
    if (!(forecast->rel_std >= 0.0) || !std::isfinite(forecast->rel_std)) {
      Fail("forecast: rel_std >= 0 violated");
    }
  }
}

void LoadData::Validate(const EnergySystem& sys) const {
  if (elec.rows() != sys.num_elec_zones() || elec.cols() != sys.horizon) {
    Fail(fmt::format("elec loads: shape {}x{} does not match {}x{}",
                     elec.rows(), elec.cols(), sys.num_elec_zones(),
                     sys.horizon));
  }
  if (heat.rows() != sys.num_heat_zones() || heat.cols() != sys.horizon) {
    Fail(fmt::format("heat loads: shape {}x{} does not match {}x{}",
                     heat.rows(), heat.cols(), sys.num_heat_zones(),
                     sys.horizon));
  }
  for (int z = 0; z < elec.rows(); ++z) {
    for (int t = 0; t < elec.cols(); ++t) {
      if (!std::isfinite(elec(z, t)) || elec(z, t) < 0.0) {
        Fail(fmt::format("elec load zone {} hour {}: L^E >= 0 violated",
                         sys.elec_zones[z], t));
      }
    }
  }
  for (int z = 0; z < heat.rows(); ++z) {
    for (int t = 0; t < heat.cols(); ++t) {
      if (!std::isfinite(heat(z, t)) || heat(z, t) < 0.0) {
        Fail(fmt::format("heat load zone {} hour {}: L^H >= 0 violated",
                         sys.heat_zones[z], t));
      }
    }
  }
}

LoadData ApplyStress(const LoadData& loads, double eta_h, double eta_e) {
  if (!(eta_h > 0.0)) Fail("stress: eta_H > 0 violated");
  if (!(eta_e > 0.0)) Fail("stress: eta_E > 0 violated");
  LoadData out;
  out.heat = loads.heat * eta_h;
  out.elec = loads.elec * eta_e;
  return out;
}

Case ApplyStress(const Case& c, double eta_h, double eta_e) {
  Case out{c.system, ApplyStress(c.loads, eta_h, eta_e)};
  if (out.system.forecast.has_value()) {
    out.system.forecast->elec *= eta_e;
  }
  return out;
}

double ChpMaxConsistentHeat(const ChpUnit& chp) {
  return chp.fuel_max / (chp.rho_e / chp.r + chp.rho_h);
}

ElecBounds ChpElecBounds(double h, const ChpUnit& chp) {
  if (!(h >= 0.0))
    Fail(fmt::format("chp_elec_bounds: h >= 0 violated (h={})", h));
  if (chp.rho_h * h > chp.fuel_max) {
    Fail(fmt::format("chp_elec_bounds: rho_H*h <= Fmax violated (h={})", h));
  }
  return {h / chp.r, (chp.fuel_max - chp.rho_h * h) / chp.rho_e};
}

ElecBounds HpElecBounds(double h, const HeatPumpUnit& hp) {
  if (!(h >= 0.0))
    Fail(fmt::format("hp_elec_bounds: h >= 0 violated (h={})", h));
  const double e = -h / hp.cop;
  return {e, e};
}

// ---------------------------------------------------------------------------
// Synthetic case.

namespace {

Series Constant(int horizon, double v) { return Series(horizon, v); }

constexpr std::uint64_t kSynthStream = 0x5e7c;

}  // namespace

Case SynthCase(std::uint64_t seed, const SynthSpec& spec) {
  if (spec.elec_zones < 1 || spec.heat_zones < 1) {
    Fail("synth: at least one electricity and one heat zone required");
  }
  if (spec.heat_only < spec.heat_zones) {
    Fail("synth: need at least one continuous heat-only unit per heat zone");
  }
  if (spec.horizon < 1) Fail("synth: horizon >= 1 violated");
  if (spec.chp < 0 || spec.heat_pumps < 0 || spec.elec_only < 0 ||
      spec.wind < 0) {
    Fail("synth: unit counts must be nonnegative");
  }
  if (spec.elec_only + spec.wind + spec.chp < 1) {
    Fail("synth: at least one electricity producer required");
  }
  if (!(spec.demand_min_mwh >= 0.0) ||
      !(spec.demand_max_mwh > spec.demand_min_mwh)) {
    Fail("synth: demand band must satisfy 0 <= min < max");
  }

  CounterRng rng(seed, kSynthStream);
  const int nz = spec.elec_zones;
  const int nh = spec.heat_zones;
  const int horizon = spec.horizon;
  const double peak = spec.demand_max_mwh;

  Case c;
  EnergySystem& sys = c.system;
  sys.horizon = horizon;
  for (int z = 0; z < nz; ++z)
    sys.elec_zones.push_back(fmt::format("E{}", z + 1));
  for (int z = 0; z < nh; ++z)
    sys.heat_zones.push_back(fmt::format("H{}", z + 1));

  for (int z = 0; z + 1 < nz; ++z) {
    const double tc = ToWh(0.08 * peak * rng.Uniform(0.9, 1.1));
    sys.lines.push_back({fmt::format("L{}", z + 1), sys.elec_zones[z],
                         sys.elec_zones[z + 1], Constant(horizon, -tc),
                         Constant(horizon, tc)});
  }

  // Conventional generators: tiers of increasing cost, capacity split so that
  // each zone can serve twice its share of the peak.
  static constexpr double kTierCost[][2] = {
      {9.0, 13.0}, {22.0, 30.0}, {45.0, 70.0}, {80.0, 110.0}};
  static constexpr double kTierWeight[] = {0.18, 0.22, 0.6, 0.2};
  std::vector<double> zone_weight(nz, 0.0);
  for (int k = 0; k < spec.elec_only; ++k) {
    zone_weight[k % nz] += kTierWeight[std::min(k / nz, 3)];
  }
  for (int k = 0; k < spec.elec_only; ++k) {
    const int z = k % nz;
    const int tier = std::min(k / nz, 3);
    const double cap = 2.1 * peak / nz * kTierWeight[tier] / zone_weight[z];
    const double cost = rng.Uniform(kTierCost[tier][0], kTierCost[tier][1]);
    sys.units.push_back({fmt::format("G{}", k + 1),
                         ElecOnlyUnit{sys.elec_zones[z], Constant(horizon, 0.0),
                                      Constant(horizon, ToWh(cap)),
                                      Constant(horizon, ToEurPerWh(cost))}});
  }
  for (int k = 0; k < spec.wind; ++k) {
    const int z = k % nz;
    const double cap = 0.1 * peak / nz;
    Series e_max(horizon);
    double level = rng.Uniform(0.3, 0.9);
    for (int t = 0; t < horizon; ++t) {
      level = std::clamp(level + 0.15 * (rng.Uniform() - 0.5), 0.1, 1.0);
      e_max[t] = ToWh(cap * level);
    }
    sys.units.push_back({fmt::format("W{}", k + 1),
                         ElecOnlyUnit{sys.elec_zones[z], Constant(horizon, 0.0),
                                      e_max, Constant(horizon, 0.0)}});
  }

  static constexpr double kHeatCost[][2] = {
      {14.0, 18.0}, {38.0, 45.0}, {55.0, 65.0}};
  static constexpr double kHeatCap[] = {200.0, 500.0, 300.0};
  for (int k = 0; k < spec.heat_only; ++k) {
    const int z = k % nh;
    const int tier = std::min(k / nh, 2);
    const double cost = rng.Uniform(kHeatCost[tier][0], kHeatCost[tier][1]);
    sys.units.push_back({fmt::format("HO{}", k + 1),
                         HeatOnlyUnit{sys.heat_zones[z], Constant(horizon, 0.0),
                                      Constant(horizon, ToWh(kHeatCap[tier])),
                                      Constant(horizon, ToEurPerWh(cost))}});
  }
  for (int k = 0; k < spec.chp; ++k) {
    ChpUnit chp;
    chp.heat_zone = sys.heat_zones[k % nh];
    chp.elec_zone = sys.elec_zones[k % nz];
    chp.rho_e = 1.0;
    chp.rho_h = rng.Uniform(0.15, 0.25);
    chp.r = rng.Uniform(1.8, 2.2);
    chp.fuel_max = ToWh(rng.Uniform(360.0, 440.0));
    chp.h_min = Constant(horizon, 0.0);
    chp.h_max = Constant(horizon, ToWh(rng.Uniform(160.0, 200.0)));
    chp.heat_cost = Constant(horizon, ToEurPerWh(rng.Uniform(10.0, 12.0)));
    chp.elec_cost = Constant(horizon, ToEurPerWh(rng.Uniform(20.0, 24.0)));
    sys.units.push_back({fmt::format("CHP{}", k + 1), chp});
  }
  for (int k = 0; k < spec.heat_pumps; ++k) {
    HeatPumpUnit hp;
    hp.heat_zone = sys.heat_zones[k % nh];
    hp.elec_zone = sys.elec_zones[k % nz];
    hp.cop = rng.Uniform(2.5, 3.2);
    hp.h_min = Constant(horizon, 0.0);
    hp.h_max = Constant(horizon, ToWh(rng.Uniform(100.0, 140.0)));
    hp.elec_cost = Constant(horizon, 0.0);
    sys.units.push_back({fmt::format("HP{}", k + 1), hp});
  }
  if (spec.price_limits) {
    sys.price_cap = ToEurPerWh(spec.price_cap_eur_mwh);
    sys.price_floor = ToEurPerWh(spec.price_floor_eur_mwh);
  }

  // Aggregate demand: night valley, daytime plateau and an evening peak,
  // rescaled to span the configured band.
  std::vector<double> shape(horizon);
  for (int t = 0; t < horizon; ++t) {
    const double hour = 24.0 * t / horizon;
    const double day =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (hour - 4.0) / 24.0));
    const double evening = std::exp(-std::pow((hour - 19.0) / 2.5, 2));
    shape[t] = 0.7 * day + 0.3 * evening + 0.03 * (rng.Uniform() - 0.5);
  }
  const auto [smin, smax] = std::minmax_element(shape.begin(), shape.end());
  const double lo = *smin;
  const double span = *smax - *smin;
  std::vector<double> base_share(nz);
  for (int z = 0; z < nz; ++z) base_share[z] = rng.Uniform(0.8, 1.2);
  c.loads.elec.resize(nz, horizon);
  for (int t = 0; t < horizon; ++t) {
    const double frac = span > 0.0 ? 0.02 + 0.96 * (shape[t] - lo) / span : 0.5;
    const double total = spec.demand_min_mwh +
                         (spec.demand_max_mwh - spec.demand_min_mwh) * frac;
    double norm = 0.0;
    std::vector<double> share(nz);
    for (int z = 0; z < nz; ++z) {
      share[z] = base_share[z] * rng.Uniform(0.95, 1.05);
      norm += share[z];
    }
    for (int z = 0; z < nz; ++z) {
      c.loads.elec(z, t) = ToWh(total * share[z] / norm);
    }
  }
  c.loads.heat.resize(nh, horizon);
  for (int z = 0; z < nh; ++z) {
    const double level = rng.Uniform(280.0, 340.0);
    for (int t = 0; t < horizon; ++t) {
      const double hour = 24.0 * t / horizon;
      const double morning = std::exp(-std::pow((hour - 7.0) / 2.5, 2));
      const double evening = std::exp(-std::pow((hour - 19.0) / 3.0, 2));
      const double mwh = level * (0.8 + 0.25 * morning + 0.2 * evening) *
                         rng.Uniform(0.97, 1.03);
      c.loads.heat(z, t) = ToWh(mwh);
    }
  }
  if (spec.forecast_rel_std > 0.0) {
    PublicForecast f;
    f.rel_std = spec.forecast_rel_std;
    f.elec.resize(nz, horizon);
    for (int z = 0; z < nz; ++z) {
      for (int t = 0; t < horizon; ++t) {
        f.elec(z, t) =
            std::max(0.0, c.loads.elec(z, t) *
                              (1.0 + spec.forecast_rel_std * rng.Normal()));
      }
    }
    sys.forecast = std::move(f);
  }
  sys.Validate();
  c.loads.Validate(sys);
  return c;
}

}  // namespace dpsc
