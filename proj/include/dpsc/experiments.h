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

// Cost of privacy, alpha sweeps, stress heatmaps and the error-bound Monte
// Carlo check. Every output is a pure function of the configuration and the
// master seed, whatever the worker count.

#ifndef DPSC_EXPERIMENTS_H_
#define DPSC_EXPERIMENTS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsc/markets.h"
#include "dpsc/privacy.h"
#include "dpsc/sysmodel.h"

namespace dpsc {

enum class Mechanism { kLaplace, kPpsm };

std::string ToString(Mechanism m);
// Throws ValidationError on anything but "laplace" or "ppsm".
Mechanism ParseMechanism(const std::string& name);

struct PrivacyMetrics {
  bool failed = false;
  std::string failure;
  double delta_d = 0.0;        // ||D_released - D||_1, MWh
  double delta_omega_l = 0.0;  // %
  double delta_omega_f = 0.0;  // %
};

// Leader solve on the true loads and the follower clear it implies.
struct ReferenceRun {
  LeaderOutcome leader;
  double omega_l = 0.0;  // EUR
  double omega_f = 0.0;  // EUR
};

ReferenceRun SolveReference(const EnergySystem& sys, const LoadData& loads,
                            const LeaderOptions& opt);

// The leader solves on the released loads, which fixes the CHP/HP bounds;
// the follower then clears the true loads under those bounds. Failures are
// reported in the result, never thrown.
PrivacyMetrics CostOfPrivacy(const EnergySystem& sys, const LoadData& loads,
                             const ReferenceRun& ref,
                             const Eigen::MatrixXd& d_released,
                             const LeaderOptions& opt);
PrivacyMetrics CostOfPrivacy(const EnergySystem& sys, const LoadData& loads,
                             const Eigen::MatrixXd& d_released,
                             const LeaderOptions& opt);

struct Summary {
  int instances = 0;
  int failures = 0;
  double mean_delta_d = 0.0;
  double mean_delta_omega_l = 0.0;
  double mean_delta_omega_f = 0.0;
  double median_delta_d = 0.0;
  double median_delta_omega_l = 0.0;
  double median_delta_omega_f = 0.0;
};

// Means and medians over the successful entries, in the given order.
Summary Summarize(const std::vector<PrivacyMetrics>& metrics);

struct ExperimentConfig {
  // Fixed case for every instance; otherwise instance i is a fresh
  // SynthCase drawn from the master seed.
  std::optional<Case> base;
  SynthSpec synth;
  std::uint64_t master_seed = 0;
  int seeds = 20;
  // alpha is overridden by the sweeps; privacy.leader drives the metrics.
  PrivacyParams privacy;
  int workers = 1;
  // Test hook: every release equals the true loads.
  bool zero_noise = false;
};

// Case and noise seed of instance i.
Case InstanceCase(const ExperimentConfig& cfg, int i);
std::uint64_t InstanceNoiseSeed(const ExperimentConfig& cfg, int i);

// Releases and metrics of both mechanisms for one instance.
struct InstanceResult {
  PrivacyMetrics laplace;
  PrivacyMetrics ppsm;
  // Worst fidelity residuals of the PPSM trace, EUR/Wh and EUR.
  double price_residual = 0.0;
  double cost_residual = 0.0;
};

InstanceResult RunInstance(const Case& c, const PrivacyParams& p,
                           bool zero_noise);

struct Table1Row {
  Mechanism mechanism = Mechanism::kLaplace;
  double alpha = 0.0;  // Wh
  Summary summary;
};

std::vector<Table1Row> RunTable1(const ExperimentConfig& cfg,
                                 const std::vector<double>& alphas);

struct StressRow {
  double eta_h = 1.0;
  double eta_e = 1.0;
  Mechanism mechanism = Mechanism::kLaplace;
  double alpha = 0.0;  // Wh
  Summary summary;
};

std::vector<StressRow> RunStressSweep(const ExperimentConfig& cfg,
                                      const std::vector<double>& eta_h,
                                      const std::vector<double>& eta_e);

struct ErrorBoundReport {
  int instances = 0;
  int failures = 0;
  double mean_l1 = 0.0;  // mean ||D_hat - D||_1, MWh
  double bound = 0.0;    // 4 (w alpha)^2 with w alpha in MWh
  double ratio = 0.0;    // mean_l1 / bound
  bool pass = false;
};

// 4 (w alpha)^2, alpha in Wh, result in MWh^2.
double ErrorBound(int w, double alpha);

// Throws ValidationError when cfg.seeds < 30.
ErrorBoundReport CheckErrorBound(const ExperimentConfig& cfg);

// CSV with a comment header naming the metric definitions. Numbers use a
// fixed format so that re-runs compare byte for byte.
std::string Table1Csv(const std::vector<Table1Row>& rows);
std::string StressCsv(const std::vector<StressRow>& rows);
std::string ErrorBoundCsv(const ErrorBoundReport& r, const PrivacyParams& p);

// Runs f(i) for i in [0, n) on up to `workers` threads.
void ParallelFor(int n, int workers, const std::function<void(int)>& f);

}  // namespace dpsc

#endif  // DPSC_EXPERIMENTS_H_
