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

#ifndef DPSC_COMMON_H_
#define DPSC_COMMON_H_

#include <limits>
#include <stdexcept>
#include <string>

namespace dpsc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Internal market algebra runs in MWh and EUR/MWh; domain types hold Wh and
// EUR/Wh.
inline constexpr double kWhPerMWh = 1e6;

inline double ToMWh(double wh) { return wh / kWhPerMWh; }
inline double ToWh(double mwh) { return mwh * kWhPerMWh; }
inline double ToEurPerMWh(double eur_per_wh) { return eur_per_wh * kWhPerMWh; }
inline double ToEurPerWh(double eur_per_mwh) { return eur_per_mwh / kWhPerMWh; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input violates a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A market clearing or optimization problem has no feasible point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Numerical engine failure (iteration limit, big-M escalation exhausted, ...).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpsc

#endif  // DPSC_COMMON_H_
