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

#include "dpsc/outcome_io.h"

#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dpsc/common.h"

namespace dpsc {

namespace {

using Json = nlohmann::ordered_json;

Json Rows(const Eigen::MatrixXd& m, double scale) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j) / scale);
    out.push_back(std::move(row));
  }
  return out;
}

Json Vector(const Eigen::VectorXd& v, double scale = 1.0) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i] / scale);
  return out;
}

// Labelled matrix: {"rows": [...], "values": [[...]]}.
Json Labelled(const Eigen::MatrixXd& m, const std::vector<std::string>& names,
              double scale) {
  return Json{{"rows", names}, {"values", Rows(m, scale)}};
}

constexpr double kPrice = 1.0 / kWhPerMWh;

Json Follower(const EnergySystem& sys, const FollowerOutcome& f) {
  return Json{
      {"cost_eur", f.cost},
      {"hourly_cost_eur", Vector(f.hourly_cost)},
      {"dispatch_mwh", Labelled(f.e, UnitNames(sys), kWhPerMWh)},
      {"flow_mwh", Labelled(f.f, LineNames(sys), kWhPerMWh)},
      {"price_eur_per_mwh", Labelled(f.lambda, sys.elec_zones, kPrice)},
      {"shed_mwh", Labelled(f.shed, sys.elec_zones, kWhPerMWh)},
      {"spill_mwh", Labelled(f.spill, sys.elec_zones, kWhPerMWh)},
  };
}

Json Bounds(const EnergySystem& sys, const CouplingBounds& b) {
  return Json{{"e_min_mwh", Labelled(b.e_min, UnitNames(sys), kWhPerMWh)},
              {"e_max_mwh", Labelled(b.e_max, UnitNames(sys), kWhPerMWh)}};
}

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string MatrixToCsv(const Eigen::MatrixXd& m,
                        const std::vector<std::string>& names, double scale,
                        const std::string& label) {
  if (static_cast<int>(names.size()) != m.rows()) {
    throw ValidationError("matrix csv: one name per row required");
  }
  std::string out = label;
  for (int t = 0; t < m.cols(); ++t) out += fmt::format(",h{}", t);
  out += "\n";
  for (int i = 0; i < m.rows(); ++i) {
    out += names[i];
    for (int t = 0; t < m.cols(); ++t) {
      out += fmt::format(",{:.17g}", m(i, t) / scale);
    }
    out += "\n";
  }
  return out;
}

Eigen::MatrixXd MatrixFromCsv(const std::string& text,
                              std::vector<std::string>* names, double scale) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("matrix csv: empty input");
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream cells(s);
    while (std::getline(cells, cell, ',')) out.push_back(cell);
    return out;
  };
  const size_t cols = split(line).size();
  if (cols < 1) throw ParseError("matrix csv: missing header");
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != cols) {
      throw ParseError(
          fmt::format("matrix csv: row {} has {} cells, expected {}",
                      rows.size() + 1, cells.size(), cols));
    }
    labels.push_back(cells[0]);
    std::vector<double> row;
    for (size_t k = 1; k < cells.size(); ++k) {
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[k], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[k].size() || used == 0) {
        throw ParseError(fmt::format("matrix csv: bad number '{}' in row {}",
                                     cells[k], rows.size() + 1));
      }
      row.push_back(v * scale);
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), cols - 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j + 1 < cols; ++j) m(i, j) = rows[i][j];
  }
  if (names) *names = std::move(labels);
  return m;
}

std::vector<std::string> UnitNames(const EnergySystem& sys) {
  std::vector<std::string> out;
  for (const Unit& u : sys.units) out.push_back(u.id);
  return out;
}

std::vector<std::string> LineNames(const EnergySystem& sys) {
  std::vector<std::string> out;
  for (const TransmissionLine& l : sys.lines) out.push_back(l.id);
  return out;
}

std::string FollowerReportJson(const EnergySystem& sys,
                               const FollowerOutcome& f) {
  return Dump(Follower(sys, f));
}

std::string LeaderReportJson(const EnergySystem& sys, const LeaderOutcome& l) {
  Json j{
      {"cost_eur", l.cost},
      {"reformulation_cost_eur", l.milp_cost},
      {"discretization_gap_eur", l.discretization_gap},
      {"hourly_cost_eur", Vector(l.hourly_cost)},
      {"nodes", l.nodes},
      {"escalations", l.escalations},
      {"heat_mwh", Labelled(l.h, UnitNames(sys), kWhPerMWh)},
      {"bounds", Bounds(sys, l.bounds)},
      {"follower", Follower(sys, l.follower)},
  };
  return Dump(j);
}

std::string PrivacyParamsJson(const PrivacyParams& p) {
  Json j{
      {"epsilon", p.epsilon},
      {"alpha_mwh", ToMWh(p.alpha)},
      {"w", p.w},
      {"eta_p", p.eta_p},
      {"eta_d", p.eta_d},
      {"lambda_floor_eur_per_mwh", ToEurPerMWh(p.lambda_floor)},
      {"seed", p.seed},
      {"budget_split", ToString(p.budget_split)},
      {"fuse_forecast", p.fuse_forecast},
      {"scale_mwh", ToMWh(p.scale())},
      {"k_bits", p.leader.k_bits},
      {"leader_method", p.leader.method == LeaderMethod::kPriceEnumeration
                            ? "price_enumeration"
                            : "binary_expansion"},
  };
  return Dump(j);
}

std::string PpsmReportJson(const EnergySystem& sys, const PpsmTrace& trace,
                           const PrivacyParams& p) {
  const FidelityResult& fid = trace.fidelity;
  Json j{
      {"params", Json::parse(PrivacyParamsJson(p))},
      {"obfuscation", Json{{"scale_mwh", ToMWh(trace.obfuscation.scale)},
                           {"d_tilde_mwh", Labelled(trace.obfuscation.d_tilde,
                                                    sys.elec_zones, kWhPerMWh)},
                           {"xi_mwh", Labelled(trace.obfuscation.xi,
                                               sys.elec_zones, kWhPerMWh)}}},
      {"prediction_loads_mwh",
       Labelled(trace.prediction_loads, sys.elec_zones, kWhPerMWh)},
      {"leader_prediction",
       Json{
           {"price_eur_per_mwh",
            Labelled(trace.leader.lambda, sys.elec_zones, kPrice)},
           {"bounds", Bounds(sys, trace.leader.bounds)},
           {"iterations", trace.leader.iterations},
           {"converged", trace.leader.converged},
           {"last_change_eur_per_mwh", ToEurPerMWh(trace.leader.last_change)}}},
      {"follower_prediction",
       Json{{"cost_eur", trace.follower.cost},
            {"hourly_cost_eur", Vector(trace.follower.hourly_cost)},
            {"price_eur_per_mwh",
             Labelled(trace.follower.lambda, sys.elec_zones, kPrice)}}},
      {"fidelity",
       Json{{"d_hat_mwh", Labelled(fid.d_hat, sys.elec_zones, kWhPerMWh)},
            {"price_eur_per_mwh",
             Labelled(fid.lambda_hat, sys.elec_zones, kPrice)},
            {"hourly_cost_eur", Vector(fid.omega_hat)},
            {"cost_eur", fid.omega_hat.sum()},
            {"eta_p_eur", Vector(fid.bands.eta_p)},
            {"eta_d_eur_per_mwh",
             Labelled(fid.bands.eta_d, sys.elec_zones, kPrice)},
            {"price_residual_eur_per_mwh", ToEurPerMWh(fid.price_residual)},
            {"cost_residual_eur", fid.cost_residual},
            {"distance_mwh2", fid.distance},
            {"price_vectors", fid.price_vectors},
            {"margin_retries", fid.margin_retries}}},
  };
  return Dump(j);
}

}  // namespace dpsc
