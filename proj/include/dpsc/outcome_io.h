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

// Reports for market outcomes and privacy traces. JSON reports and CSV
// matrices are in MWh and EUR/MWh; matrices have one row per zone or unit
// and one column per hour.

#ifndef DPSC_OUTCOME_IO_H_
#define DPSC_OUTCOME_IO_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpsc/markets.h"
#include "dpsc/privacy.h"
#include "dpsc/sysmodel.h"

namespace dpsc {

// `scale` divides every entry: kWhPerMWh for energies, 1 / kWhPerMWh for
// prices. Rows are labelled by `names` under the column `label`.
std::string MatrixToCsv(const Eigen::MatrixXd& m,
                        const std::vector<std::string>& names,
                        double scale = kWhPerMWh,
                        const std::string& label = "zone");

// Inverse of MatrixToCsv; the labels are returned in `names` when given.
// Throws ParseError on ragged or non-numeric input.
Eigen::MatrixXd MatrixFromCsv(const std::string& text,
                              std::vector<std::string>* names = nullptr,
                              double scale = kWhPerMWh);

std::vector<std::string> UnitNames(const EnergySystem& sys);
std::vector<std::string> LineNames(const EnergySystem& sys);

std::string FollowerReportJson(const EnergySystem& sys,
                               const FollowerOutcome& f);
std::string LeaderReportJson(const EnergySystem& sys, const LeaderOutcome& l);
std::string PrivacyParamsJson(const PrivacyParams& p);
std::string PpsmReportJson(const EnergySystem& sys, const PpsmTrace& trace,
                           const PrivacyParams& p);

}  // namespace dpsc

#endif  // DPSC_OUTCOME_IO_H_
