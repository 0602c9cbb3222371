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

#include "dpsc/fixtures.h"

#include <cmath>

#include "dpsc/common.h"

namespace dpsc::fixtures {

LpProblem RandomLp(std::mt19937_64& rng, int n, int m, bool allow_infinite) {
  std::uniform_int_distribution<int> coef(-5, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LpProblem p;
  p.a.resize(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) p.a(i, j) = coef(rng);
  }
  p.c.resize(n);
  p.lo.resize(n);
  p.hi.resize(n);
  Eigen::VectorXd x0(n);
  for (int j = 0; j < n; ++j) {
    p.c[j] = std::round(20.0 * unit(rng) - 10.0) / 2.0;
    const double lo = std::floor(10.0 * unit(rng) - 5.0);
    const double hi = lo + 1.0 + std::floor(8.0 * unit(rng));
    p.lo[j] = lo;
    p.hi[j] = hi;
    x0[j] = lo + (hi - lo) * unit(rng);
    if (allow_infinite) {
      const double r = unit(rng);
      // Costs are signed so that one-sided bounds keep the LP bounded more
      // often than not.
      if (r < 0.15) {
        p.hi[j] = kInf;
        p.c[j] = std::abs(p.c[j]) + 0.5;
      } else if (r < 0.25) {
        p.lo[j] = -kInf;
        p.c[j] = -std::abs(p.c[j]) - 0.5;
      }
    }
  }
  p.b = p.a * x0;
  return p;
}

Case MeritOrderCase(double load_mwh) {
  Case c;
  EnergySystem& s = c.system;
  s.horizon = 1;
  s.elec_zones = {"Z"};
  s.heat_zones = {"H"};
  s.units.push_back(
      {"A", ElecOnlyUnit{"Z", {0.0}, {ToWh(80)}, {ToEurPerWh(10)}}});
  s.units.push_back(
      {"B", ElecOnlyUnit{"Z", {0.0}, {ToWh(50)}, {ToEurPerWh(20)}}});
  s.units.push_back(
      {"Q", HeatOnlyUnit{"H", {0.0}, {ToWh(100)}, {ToEurPerWh(30)}}});
  c.loads.elec = Eigen::MatrixXd::Constant(1, 1, ToWh(load_mwh));
  c.loads.heat = Eigen::MatrixXd::Zero(1, 1);
  return c;
}

Case RandomToyCase(std::uint64_t seed, bool with_chp) {
  std::mt19937_64 rng(seed);
  auto u = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  Case c;
  EnergySystem& s = c.system;
  s.horizon = 1;
  s.elec_zones = {"Z"};
  s.heat_zones = {"H"};
  s.units.push_back(
      {"G1",
       ElecOnlyUnit{"Z", {0.0}, {ToWh(u(60, 100))}, {ToEurPerWh(u(5, 15))}}});
  s.units.push_back(
      {"G2",
       ElecOnlyUnit{"Z", {0.0}, {ToWh(u(60, 100))}, {ToEurPerWh(u(20, 35))}}});
  s.units.push_back(
      {"G3", ElecOnlyUnit{"Z", {0.0}, {ToWh(200)}, {ToEurPerWh(u(40, 60))}}});
  s.units.push_back(
      {"Q1",
       HeatOnlyUnit{"H", {0.0}, {ToWh(u(40, 80))}, {ToEurPerWh(u(10, 25))}}});
  s.units.push_back(
      {"Q2", HeatOnlyUnit{"H", {0.0}, {ToWh(200)}, {ToEurPerWh(u(30, 50))}}});
  if (with_chp) {
    ChpUnit chp;
    chp.heat_zone = "H";
    chp.elec_zone = "Z";
    chp.rho_e = 1.0;
    chp.rho_h = u(0.1, 0.3);
    chp.r = u(1.5, 2.5);
    chp.fuel_max = ToWh(u(80, 120));
    chp.h_min = {0.0};
    chp.h_max = {ToWh(u(30, 60))};
    chp.heat_cost = {ToEurPerWh(u(5, 15))};
    chp.elec_cost = {ToEurPerWh(u(15, 30))};
    s.units.push_back({"CHP", chp});
  } else {
    HeatPumpUnit hp;
    hp.heat_zone = "H";
    hp.elec_zone = "Z";
    hp.cop = u(2, 4);
    hp.h_min = {0.0};
    hp.h_max = {ToWh(u(30, 60))};
    hp.elec_cost = {0.0};
    s.units.push_back({"HP", hp});
  }
  c.loads.elec = Eigen::MatrixXd::Constant(1, 1, ToWh(u(50, 150)));
  c.loads.heat = Eigen::MatrixXd::Constant(1, 1, ToWh(u(40, 100)));
  s.Validate();
  c.loads.Validate(s);
  return c;
}

}  // namespace dpsc::fixtures
