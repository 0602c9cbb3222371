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

// One hour of the electricity market in MWh and EUR/MWh, shared by the
// follower clear, the leader reformulation and fidelity recovery.

#ifndef DPSC_SRC_FOLLOWER_MODEL_H_
#define DPSC_SRC_FOLLOWER_MODEL_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsc/lp.h"
#include "dpsc/markets.h"
#include "dpsc/sysmodel.h"

namespace dpsc::internal {

struct Offer {
  int unit;
  int zone;
  double lo;
  double hi;
  double cost;
};

struct Link {
  int line;
  int from;
  int to;
  double lo;
  double hi;
};

struct FollowerHour {
  int hour = 0;
  int num_zones = 0;
  std::vector<Offer> offers;  // elec-only, CHP and HP units in system order
  std::vector<Link> links;
  bool limits = false;
  double cap = 0.0;
  double floor = 0.0;
};

// Offers for CHPs and HPs take their bounds from `bounds` (Wh, converted).
FollowerHour MakeFollowerHour(const EnergySystem& sys, int hour,
                              const CouplingBounds& bounds);

// Variable layout of BuildFollowerLp: offers, links, then per zone shed and
// spill when the hour has price limits. Row z is the balance of zone z.
struct FollowerLayout {
  int first_link = 0;
  int first_shed = -1;
  int first_spill = -1;
  int num_vars = 0;
};

FollowerLayout LayoutOf(const FollowerHour& fh);

LpProblem BuildFollowerLp(const FollowerHour& fh, const Eigen::VectorXd& load);

// Human-readable reason why `load` cannot be balanced.
std::string BalanceDiagnostic(const EnergySystem& sys, const FollowerHour& fh,
                              const Eigen::VectorXd& load);

// Per-zone price limits of the hour, or a finite box from the offer costs
// widened by `margin` when the system has none.
void PriceBox(const FollowerHour& fh, double margin, double* lo, double* hi);

double SeriesAt(const Series& s, int t);

// Clears hour t into column t of `out`, whose matrices must already have
// full size. Throws like ClearFollower.
void ClearHour(const EnergySystem& sys, int t, const CouplingBounds& bounds,
               const Eigen::VectorXd& load_wh, const LpTolerances& tol,
               FollowerOutcome* out);

// Empty outcome with every matrix sized for `sys`.
FollowerOutcome EmptyOutcome(const EnergySystem& sys);

}  // namespace dpsc::internal

#endif  // DPSC_SRC_FOLLOWER_MODEL_H_
