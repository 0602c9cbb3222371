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

// Oracle-equivalence suites run by `dpsc validate` and the acceptance run.
// Each suite compares a production solver with a brute-force reference on a
// seeded family of small instances.

#ifndef DPSC_VALIDATION_H_
#define DPSC_VALIDATION_H_

#include <cstdint>
#include <string>
#include <vector>

namespace dpsc {

struct ValidationCheck {
  std::string suite;
  int instance = 0;
  bool passed = false;
  double error = 0.0;  // |solver - oracle|, or the largest KKT residual
  double tolerance = 0.0;
  std::string detail;
};

struct ValidationOptions {
  std::uint64_t seed = 0;
  int lp_instances = 200;
  int leader_instances = 20;
  int fidelity_instances = 12;
  int k_bits = 8;
  // Test hook: every solver result r is compared as
  // r + fault * max(1, |r|).
  double fault = 0.0;
};

// solve_lp against the vertex oracle; objective within 1e-8 and every KKT
// residual within 1e-7.
std::vector<ValidationCheck> LpSuite(const ValidationOptions& opt);

// K-bit bilevel MILP against the grid oracle on one-hour toys.
std::vector<ValidationCheck> LeaderSuite(const ValidationOptions& opt);

// Fidelity recovery against the grid search over the release on toys.
std::vector<ValidationCheck> FidelitySuite(const ValidationOptions& opt);

std::vector<ValidationCheck> RunValidation(const ValidationOptions& opt);

bool AllPassed(const std::vector<ValidationCheck>& checks);

std::string ValidationCsv(const std::vector<ValidationCheck>& checks);

}  // namespace dpsc

#endif  // DPSC_VALIDATION_H_
