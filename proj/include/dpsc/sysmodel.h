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

// Techno-economic description of a coupled heat and electricity system.
//
// All powers are energies per hour in Wh and all costs are in EUR/Wh. The
// market code converts to MWh internally for conditioning.

#ifndef DPSC_SYSMODEL_H_
#define DPSC_SYSMODEL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dpsc {

using Series = std::vector<double>;

struct HeatOnlyUnit {
  std::string heat_zone;
  Series h_min, h_max;
  Series heat_cost;

  friend bool operator==(const HeatOnlyUnit&, const HeatOnlyUnit&) = default;
};

struct ChpUnit {
  std::string heat_zone;
  std::string elec_zone;
  double rho_e = 1.0;     // electricity efficiency ratio
  double rho_h = 0.0;     // heat efficiency ratio
  double fuel_max = 0.0;  // Wh
  double r = 1.0;         // minimum power-to-heat ratio
  Series h_min, h_max;
  Series heat_cost;
  Series elec_cost;

  friend bool operator==(const ChpUnit&, const ChpUnit&) = default;
};

struct HeatPumpUnit {
  std::string heat_zone;
  std::string elec_zone;
  double cop = 1.0;
  Series h_min, h_max;
  Series elec_cost;

  friend bool operator==(const HeatPumpUnit&, const HeatPumpUnit&) = default;
};

// Conventional generators and wind farms (zero cost, e_min = 0).
struct ElecOnlyUnit {
  std::string elec_zone;
  Series e_min, e_max;
  Series elec_cost;

  friend bool operator==(const ElecOnlyUnit&, const ElecOnlyUnit&) = default;
};

struct Unit {
  std::string id;
  std::variant<HeatOnlyUnit, ChpUnit, HeatPumpUnit, ElecOnlyUnit> kind;

  bool is_heat_only() const { return kind.index() == 0; }
  bool is_chp() const { return kind.index() == 1; }
  bool is_heat_pump() const { return kind.index() == 2; }
  bool is_elec_only() const { return kind.index() == 3; }
  // CHP or heat pump.
  bool is_coupling() const { return is_chp() || is_heat_pump(); }
  bool produces_heat() const { return !is_elec_only(); }
  bool in_elec_market() const { return !is_heat_only(); }

  friend bool operator==(const Unit&, const Unit&) = default;
};

// One signed flow per line; positive flow goes from `from_zone` to `to_zone`.
struct TransmissionLine {
  std::string id;
  std::string from_zone;
  std::string to_zone;
  Series tc_min, tc_max;

  friend bool operator==(const TransmissionLine&,
                         const TransmissionLine&) = default;
};

// Public load forecast available to prediction models.
struct PublicForecast {
  Eigen::MatrixXd elec;  // [elec zone][hour], Wh
  double rel_std = 0.0;  // relative standard deviation of forecast error

  friend bool operator==(const PublicForecast& a, const PublicForecast& b) {
    return a.rel_std == b.rel_std && a.elec.rows() == b.elec.rows() &&
           a.elec.cols() == b.elec.cols() && a.elec == b.elec;
  }
};

struct EnergySystem {
  std::vector<std::string> elec_zones;
  std::vector<std::string> heat_zones;
  std::vector<TransmissionLine> lines;
  std::vector<Unit> units;
  int horizon = 24;
  // Market price limits (EUR/Wh). When both are set, every zone may shed
  // load at the cap and spill surplus at the floor, so clearing never fails.
  std::optional<double> price_cap;
  std::optional<double> price_floor;
  std::optional<PublicForecast> forecast;

  int ElecZoneIndex(const std::string& zone) const;
  int HeatZoneIndex(const std::string& zone) const;
  bool has_price_limits() const {
    return price_cap.has_value() && price_floor.has_value();
  }
  int num_elec_zones() const { return static_cast<int>(elec_zones.size()); }
  int num_heat_zones() const { return static_cast<int>(heat_zones.size()); }

  // Throws ValidationError naming the violated invariant and the offending
  // unit, line or zone.
  void Validate() const;

  friend bool operator==(const EnergySystem&, const EnergySystem&) = default;
};

struct LoadData {
  Eigen::MatrixXd elec;  // [elec zone][hour], Wh
  Eigen::MatrixXd heat;  // [heat zone][hour], Wh

  // Shapes and nonnegativity against `sys`.
  void Validate(const EnergySystem& sys) const;

  friend bool operator==(const LoadData& a, const LoadData& b) {
    return a.elec.rows() == b.elec.rows() && a.elec.cols() == b.elec.cols() &&
           a.heat.rows() == b.heat.rows() && a.heat.cols() == b.heat.cols() &&
           a.elec == b.elec && a.heat == b.heat;
  }
};

struct Case {
  EnergySystem system;
  LoadData loads;

  friend bool operator==(const Case&, const Case&) = default;
};

// Size parameters for the synthetic case generator.
struct SynthSpec {
  int elec_zones = 2;
  int heat_zones = 2;
  int chp = 2;
  int heat_pumps = 1;
  int heat_only = 4;
  int elec_only = 6;  // conventional generators
  int wind = 2;
  int horizon = 24;
  // Band for the hourly aggregate electricity demand, MWh.
  double demand_min_mwh = 644.47;
  double demand_max_mwh = 2498.54;
  double price_cap_eur_mwh = 200.0;
  double price_floor_eur_mwh = -20.0;
  bool price_limits = true;
  double forecast_rel_std = 0.02;  // <= 0 disables the public forecast
};

Case SynthCase(std::uint64_t seed, const SynthSpec& spec = {});

// Scales heat loads by eta_h and electricity loads (and the public forecast,
// when present) by eta_e.
LoadData ApplyStress(const LoadData& loads, double eta_h, double eta_e);
Case ApplyStress(const Case& c, double eta_h, double eta_e);

struct ElecBounds {
  double e_min = 0.0;
  double e_max = 0.0;
};

// e_min = h / R and e_max = (F_max - rho_h h) / rho_e.
ElecBounds ChpElecBounds(double h, const ChpUnit& chp);
// Consumption is negative production: e_min = e_max = -h / COP.
ElecBounds HpElecBounds(double h, const HeatPumpUnit& hp);

// Largest heat output for which e_min(h) <= e_max(h).
double ChpMaxConsistentHeat(const ChpUnit& chp);

}  // namespace dpsc

#endif  // DPSC_SYSMODEL_H_
