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

// JSON case documents. The schema is described in docs/case_format.md.

#ifndef DPSC_CASE_IO_H_
#define DPSC_CASE_IO_H_

#include <string>

#include "dpsc/sysmodel.h"

namespace dpsc {

// Throws ParseError on malformed JSON or schema mismatches and
// ValidationError when a type invariant fails.
Case ParseCase(const std::string& json_text);
Case LoadCase(const std::string& path);

// Writes Wh / EUR/Wh values with a "Wh" unit header; ParseCase of the result
// reproduces `c` exactly.
std::string SerializeCase(const Case& c);
void SaveCase(const Case& c, const std::string& path);

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);

}  // namespace dpsc

#endif  // DPSC_CASE_IO_H_
