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

// Random instance families shared by the tests, `dpsc validate` and the
// acceptance run.

#ifndef DPSC_FIXTURES_H_
#define DPSC_FIXTURES_H_

#include <cstdint>
#include <random>

#include "dpsc/lp.h"
#include "dpsc/sysmodel.h"

namespace dpsc::fixtures {

// Random bounded LP with a feasible interior point. Some bounds are infinite
// when `allow_infinite` is set.
LpProblem RandomLp(std::mt19937_64& rng, int n, int m, bool allow_infinite);

// One electricity zone with generators A (80 MWh at 10 EUR/MWh) and
// B (50 MWh at 20 EUR/MWh), one hour, plus an idle heat zone.
Case MeritOrderCase(double load_mwh);

// Random one-hour toy: one electricity zone with three elec-only units, one
// heat zone with two heat-only units and either a CHP or a HP.
Case RandomToyCase(std::uint64_t seed, bool with_chp);

}  // namespace dpsc::fixtures

#endif  // DPSC_FIXTURES_H_
