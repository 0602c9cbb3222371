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

// Electricity (follower) and heat (leader) market clearing.
//
// All matrices are indexed [row][hour]. Unit-indexed matrices have one row
// per entry of EnergySystem::units; rows of units that do not take part in a
// quantity are zero.

#ifndef DPSC_MARKETS_H_
#define DPSC_MARKETS_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dpsc/lp.h"
#include "dpsc/sysmodel.h"

namespace dpsc {

// Electricity output bounds of CHPs and heat pumps (Wh), chosen by the leader.
struct CouplingBounds {
  Eigen::MatrixXd e_min;
  Eigen::MatrixXd e_max;

  friend bool operator==(const CouplingBounds& a, const CouplingBounds& b) {
    return a.e_min == b.e_min && a.e_max == b.e_max;
  }
};

// Bounds implied by heat dispatch `h` (units x horizon, Wh).
CouplingBounds CouplingBoundsFor(const EnergySystem& sys,
                                 const Eigen::MatrixXd& h);

struct FollowerOutcome {
  Eigen::MatrixXd e;       // units x horizon, Wh
  Eigen::MatrixXd f;       // lines x horizon, Wh, positive from -> to
  Eigen::MatrixXd lambda;  // elec zones x horizon, EUR/Wh
  // Load shed at the price cap (>= 0) and surplus spilled at the floor
  // (<= 0), Wh. Zero when the system has no price limits.
  Eigen::MatrixXd shed;
  Eigen::MatrixXd spill;
  Eigen::VectorXd hourly_cost;  // EUR, includes shed and spill
  double cost = 0.0;            // EUR, omega^F
};

// Per-hour LPs. `elec_loads` may hold negative entries, which act as
// injections. Throws InfeasibleError with a zone balance diagnostic.
FollowerOutcome ClearFollower(const EnergySystem& sys,
                              const Eigen::MatrixXd& elec_loads,
                              const CouplingBounds& bounds,
                              const LpTolerances& tol = {});

// Leader objective per hour given heat dispatch and a follower outcome.
Eigen::VectorXd LeaderHourlyCost(const EnergySystem& sys,
                                 const Eigen::MatrixXd& h,
                                 const FollowerOutcome& follower);

enum class LeaderMethod {
  // CHP/HP heat on a K-bit grid, follower duals in a big-M MILP.
  kBinaryExpansion,
  // Exact: one LP per vector of candidate zone prices (offer costs, cap and
  // floor). Hours with more than `max_price_vectors` vectors fall back to
  // the binary expansion.
  kPriceEnumeration,
};

struct LeaderOptions {
  LeaderMethod method = LeaderMethod::kBinaryExpansion;
  std::int64_t max_price_vectors = 4096;
  // Distance from bounds, relative to the hour's largest bound, that makes
  // an enumerated price the unique follower dual.
  double interior_margin = 1e-7;
  int k_bits = 8;
  double mip_gap = 1e-6;
  std::int64_t node_limit = 1000000;
  // Doublings of the dual big-M before giving up.
  int max_escalations = 3;
  LpTolerances lp;
};

struct LeaderOutcome {
  Eigen::MatrixXd h;  // units x horizon, Wh
  CouplingBounds bounds;
  FollowerOutcome follower;  // exact re-clear at `bounds`
  Eigen::VectorXd hourly_cost;
  double cost = 0.0;       // omega^L from the re-clear
  double milp_cost = 0.0;  // objective of the single-level reformulation
  // Upper bound on the loss from restricting CHP/HP heat to the K-bit grid,
  // EUR, summed over the hours solved on the grid.
  double discretization_gap = 0.0;
  std::int64_t nodes = 0;  // B&B nodes plus price-vector LPs
  int escalations = 0;
};

// Bilevel heat market, one single-level MILP per hour. Throws
// InfeasibleError when heat balance cannot be met and SolverError when the
// big-M escalation is exhausted.
LeaderOutcome SolveLeaderBilevel(const EnergySystem& sys, const LoadData& loads,
                                 const LeaderOptions& opt = {});

struct DecoupledHeat {
  Eigen::MatrixXd h;
  Eigen::MatrixXd e;  // CHP electricity in the decoupled problem
  CouplingBounds bounds;
  double cost = 0.0;
};

// Heat market with fixed electricity prices `lambda` (zones x horizon,
// EUR/Wh) and CHP electricity free within its heat-dependent bounds.
DecoupledHeat SolveDecoupledHeat(const EnergySystem& sys,
                                 const Eigen::MatrixXd& heat_loads,
                                 const Eigen::MatrixXd& lambda,
                                 const LpTolerances& tol = {});

// Heat merit order on C^H alone, heat pumps priced at C^E/COP.
DecoupledHeat SolveBaselineHeat(const EnergySystem& sys,
                                const Eigen::MatrixXd& heat_loads,
                                const LpTolerances& tol = {});

struct PredictOptions {
  double tol_fp = 1e-6;  // EUR/Wh
  int iter_max = 5;
  LpTolerances lp;
};

struct PricePrediction {
  Eigen::MatrixXd lambda;
  CouplingBounds bounds;
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;  // EUR/Wh
};

// Fixed point between the follower clear on `d_tilde` and the decoupled
// heat market, starting from the baseline heat dispatch.
PricePrediction PredictLeaderPrices(const EnergySystem& sys,
                                    const Eigen::MatrixXd& heat_loads,
                                    const Eigen::MatrixXd& d_tilde,
                                    const PredictOptions& opt = {});

struct FollowerPrediction {
  double cost = 0.0;
  Eigen::VectorXd hourly_cost;
  Eigen::MatrixXd lambda;
};

FollowerPrediction PredictFollower(const EnergySystem& sys,
                                   const Eigen::MatrixXd& d_tilde,
                                   const CouplingBounds& bounds,
                                   const LpTolerances& tol = {});

}  // namespace dpsc

#endif  // DPSC_MARKETS_H_
