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

// Brute-force reference implementations for tests and `dpsc validate`.
//
// Nothing here calls the simplex, branch-and-bound or market code. The LP
// oracle enumerates active sets with dense least squares, and the market
// oracles clear a single electricity zone by walking the merit order.

#ifndef DPSC_ORACLES_H_
#define DPSC_ORACLES_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsc/lp.h"
#include "dpsc/sysmodel.h"

namespace dpsc {

struct OracleConfig {
  double grid_step = 0.0;  // Wh; used by the grid oracles
  std::int64_t max_evaluations = 1000000;
  // Stand-in for infinite bounds; optima touching it are unbounded.
  double box = 1e7;
};

enum class OracleStatus { kOptimal, kInfeasible, kUnbounded };

std::string ToString(OracleStatus status);

struct VertexOracleResult {
  OracleStatus status = OracleStatus::kInfeasible;
  double obj = 0.0;
  Eigen::VectorXd x;
  std::int64_t evaluations = 0;
};

// Enumerates every assignment of each variable to {lower, upper, free} for
// which the free columns have full rank, and keeps the best feasible point.
// Throws ValidationError beyond 10 variables or the evaluation limit.
VertexOracleResult LpVertexOracle(const LpProblem& p,
                                  const OracleConfig& cfg = {});

// Single-zone merit-order clearing. Units in `sys.units` order; e_min/e_max
// give the coupling-unit bounds (ignored for elec-only units).
struct MeritOrderResult {
  bool feasible = false;
  double price = 0.0;     // EUR/Wh
  double cost = 0.0;      // EUR, sum of C^E e (plus shed/spill at cap/floor)
  std::vector<double> e;  // Wh per unit, 0 for heat-only units
};

MeritOrderResult MeritOrderClear(const EnergySystem& sys, int hour, double load,
                                 const std::vector<double>& e_min,
                                 const std::vector<double>& e_max);

struct BilevelOracleResult {
  bool feasible = false;
  double objective = 0.0;  // EUR, leader cost with exact prices
  std::vector<double> h;   // Wh per unit, 0 for elec-only units
  double price = 0.0;
  std::int64_t evaluations = 0;
};

// Exhaustive grid over every CHP/HP heat output at `cfg.grid_step`; heat-only
// units close the heat balance in merit order. One electricity zone, no lines,
// at most 3 coupling units.
BilevelOracleResult BilevelGridOracle(const EnergySystem& sys,
                                      const LoadData& loads, int hour,
                                      const OracleConfig& cfg);

// Leader cost for a fixed heat dispatch of one hour, using the merit-order
// price. Heat-only units are taken from `h` as given.
double LeaderCostAt(const EnergySystem& sys, int hour,
                    const std::vector<double>& h, double price,
                    const std::vector<double>& e);

struct FidelityOracleResult {
  bool feasible = false;
  double d_hat = 0.0;     // Wh
  double distance = 0.0;  // (d_hat - d_tilde)^2 in Wh^2
  double price = 0.0;
  double cost = 0.0;
  std::int64_t evaluations = 0;
};

// Grid search of min (D - d_tilde)^2 over D in [0, d_max] subject to
// |price(D) - lambda_bar| <= eta_d_abs and |cost(D) - omega_bar| <= eta_p_abs.
FidelityOracleResult FidelityGridOracle(const EnergySystem& sys, int hour,
                                        double d_tilde,
                                        const std::vector<double>& e_min,
                                        const std::vector<double>& e_max,
                                        double omega_bar, double lambda_bar,
                                        double eta_p_abs, double eta_d_abs,
                                        double d_max, const OracleConfig& cfg);

}  // namespace dpsc

#endif  // DPSC_ORACLES_H_
