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

#ifndef DPSC_TOOLS_COMMANDS_H_
#define DPSC_TOOLS_COMMANDS_H_

#include <cstdint>
#include <string>
#include <vector>

namespace dpsc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInvalid = 2,
  kExitInfeasible = 3,
};

// Resolved settings of one run. Empty lists take the command's defaults.
struct CliConfig {
  std::string command;
  std::string case_path = "synth";
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::vector<double> alpha_mwh;
  double epsilon = 1.0;
  double eta_p = 0.001;
  double eta_d = 0.1;
  int w = 24;
  int k_bits = 8;
  int workers = 1;
  std::string mechanism;  // laplace, ppsm, or empty for both
  bool zero_noise = false;
  int seeds = 0;
  std::vector<double> eta_h;
  std::vector<double> eta_e;
  std::string leader = "enumeration";  // or "milp"
  std::string budget_split = "per_hour";
  bool fuse_forecast = true;
  double inject_fault = 0.0;
};

// Parses argv, runs the command and maps errors to exit codes.
int Main(int argc, char** argv);

// Fills the command defaults and checks every flag. Throws ValidationError.
CliConfig Resolve(CliConfig cfg);

// Runs a resolved command and writes its outputs and manifest.json.
int Run(const CliConfig& cfg);

}  // namespace dpsc::cli

#endif  // DPSC_TOOLS_COMMANDS_H_
