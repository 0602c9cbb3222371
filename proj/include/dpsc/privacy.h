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

// w-event Laplace mechanism and the four-step privacy-preserving pipeline:
// obfuscate, predict the leader, predict the follower, recover fidelity.

#ifndef DPSC_PRIVACY_H_
#define DPSC_PRIVACY_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsc/common.h"
#include "dpsc/markets.h"
#include "dpsc/rng.h"
#include "dpsc/sysmodel.h"

namespace dpsc {

enum class BudgetSplit {
  // Daily cost tolerance split over hours in proportion to the predicted
  // hourly follower cost; one independent problem per hour.
  kPerHourProportional,
  // Price pattern chosen per hour, then one joint problem over the day with
  // the daily cost tolerance.
  kCoupled,
};

std::string ToString(BudgetSplit split);

struct PrivacyParams {
  double epsilon = 1.0;
  double alpha = ToWh(10.0);  // Wh
  int w = 24;
  double eta_p = 0.001;  // fraction of |predicted follower cost|
  double eta_d = 0.1;    // fraction of |predicted price|
  double lambda_floor = ToEurPerWh(1.0);  // EUR/Wh, floor under |price|
  std::uint64_t seed = 0;
  BudgetSplit budget_split = BudgetSplit::kPerHourProportional;
  // Blend the obfuscated loads with the public forecast, when the case has
  // one, before the prediction steps.
  bool fuse_forecast = true;
  // Price vectors per hour above which recovery gives up.
  std::int64_t max_price_vectors = 4096;
  // Interior distance (relative to the hour's largest bound) used when a
  // recovered point sits on a degenerate price.
  double interior_margin = 1e-7;
  LeaderOptions leader = [] {
    LeaderOptions o;
    o.method = LeaderMethod::kPriceEnumeration;
    return o;
  }();
  PredictOptions predict;

  // Laplace scale w * alpha / epsilon, Wh.
  double scale() const { return w * alpha / epsilon; }
  // Throws ValidationError; `horizon` <= 0 skips the window check.
  void Validate(int horizon) const;
};

// Inverse CDF of Laplace(0, b) at u in (0, 1).
double LaplaceFromUniform(double b, double u);

// One draw from Laplace(0, b). Throws ValidationError when b <= 0.
double LaplaceSample(double b, CounterRng& rng);

struct ObfuscationResult {
  Eigen::MatrixXd d_tilde;  // D + xi, Wh, unclipped
  Eigen::MatrixXd xi;       // Wh
  double scale = 0.0;       // Wh
};

// Independent Laplace(w alpha / epsilon) noise per (zone, hour), a pure
// function of the seed and the cell.
ObfuscationResult ObfuscateStream(const Eigen::MatrixXd& d,
                                  const PrivacyParams& p);

// Definition of w-adjacent stream prefixes. Throws ValidationError on a
// shape mismatch.
bool AdjacentW(const Eigen::MatrixXd& d, const Eigen::MatrixXd& d2,
               double alpha, int w);

// Load estimate fed to the prediction steps: the precision-weighted blend
// of the obfuscated loads (variance 2 b^2) and the public forecast (relative
// standard deviation rel_std), or the obfuscated loads when there is no
// forecast, no noise or fusion is off.
Eigen::MatrixXd PredictionLoads(const EnergySystem& sys,
                                const Eigen::MatrixXd& d_tilde, double scale,
                                const PrivacyParams& p);

struct FidelityTargets {
  CouplingBounds bounds;
  Eigen::VectorXd omega_bar;   // hourly predicted follower cost, EUR
  Eigen::MatrixXd lambda_bar;  // predicted prices, EUR/Wh
};

// Absolute tolerances of the fidelity constraints.
struct FidelityBands {
  Eigen::VectorXd eta_p;  // EUR per hour
  Eigen::MatrixXd eta_d;  // EUR/Wh per zone and hour
};

FidelityBands FidelityBandsFor(const FidelityTargets& targets,
                               const PrivacyParams& p);

struct FidelityResult {
  Eigen::MatrixXd d_hat;       // Wh, >= 0
  Eigen::MatrixXd lambda_hat;  // exact re-clear at d_hat, EUR/Wh
  Eigen::VectorXd omega_hat;   // EUR per hour
  FidelityBands bands;
  // Worst excess over the bands, 0 when all constraints hold.
  double price_residual = 0.0;     // EUR/Wh
  double cost_residual = 0.0;      // EUR (daily)
  double distance = 0.0;           // sum (d_hat - d_tilde)^2, MWh^2
  std::int64_t price_vectors = 0;  // QPs solved
  int margin_retries = 0;
};

// Raised when no load vector meets the fidelity bands. Carries the smallest
// violation found for the first offending hour.
class FidelityError : public InfeasibleError {
 public:
  FidelityError(int hour, double price_violation, double cost_violation);

  int hour() const { return hour_; }
  double price_violation() const { return price_violation_; }  // EUR/Wh
  double cost_violation() const { return cost_violation_; }    // EUR

 private:
  int hour_;
  double price_violation_;
  double cost_violation_;
};

// Closest nonnegative loads to `d_tilde` whose exact follower clear at
// `targets.bounds` keeps prices and cost inside the fidelity bands.
FidelityResult RecoverFidelity(const EnergySystem& sys,
                               const Eigen::MatrixXd& d_tilde,
                               const FidelityTargets& targets,
                               const PrivacyParams& p);

struct PpsmTrace {
  ObfuscationResult obfuscation;
  Eigen::MatrixXd prediction_loads;  // Wh
  PricePrediction leader;            // lambda-bar^L and e-bar bounds
  FollowerPrediction follower;       // omega-bar^F and lambda-bar^F
  FidelityResult fidelity;           // D-hat
};

struct PpsmHooks {
  bool zero_noise = false;
  // Runs right after step 1. Tests use it to poison the true loads.
  std::function<void()> after_obfuscation;
};

// Steps 2-4 on the released stream only. The true loads are not a parameter.
PpsmTrace RunPpsmFromRelease(const EnergySystem& sys,
                             const Eigen::MatrixXd& heat_loads,
                             ObfuscationResult obfuscation,
                             const PrivacyParams& p);

PpsmTrace RunPpsm(const EnergySystem& sys, const Eigen::MatrixXd& heat_loads,
                  const Eigen::MatrixXd& d_true, const PrivacyParams& p,
                  const PpsmHooks& hooks = {});

}  // namespace dpsc

#endif  // DPSC_PRIVACY_H_
