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

#ifndef DPSC_TESTS_TEST_UTIL_H_
#define DPSC_TESTS_TEST_UTIL_H_

#include <string>

#include "dpsc/fixtures.h"

namespace dpsc::testing {

using fixtures::MeritOrderCase;
using fixtures::RandomLp;
using fixtures::RandomToyCase;

std::string TestDataPath(const std::string& name);

}  // namespace dpsc::testing

#endif  // DPSC_TESTS_TEST_UTIL_H_
