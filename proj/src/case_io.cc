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

#include "dpsc/case_io.h"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dpsc/common.h"

namespace dpsc {
namespace {

using nlohmann::json;

// Conversion factors from document units to Wh and EUR/Wh.
struct Units {
  double power = 1.0;
  double price = 1.0;
};

[[noreturn]] void Bad(const std::string& msg) { throw ParseError(msg); }

const json& Field(const json& obj, const char* key, const std::string& owner) {
  auto it = obj.find(key);
  if (it == obj.end()) Bad(fmt::format("{}: missing field '{}'", owner, key));
  return *it;
}

void CheckKeys(const json& obj, std::initializer_list<const char*> allowed,
               const std::string& owner) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* k) { return it.key() == k; });
    if (!known) Bad(fmt::format("{}: unknown field '{}'", owner, it.key()));
  }
}

double Number(const json& v, const std::string& what) {
  if (!v.is_number()) Bad(what + ": expected a number");
  return v.get<double>();
}

std::string Text(const json& obj, const char* key, const std::string& owner) {
  const json& v = Field(obj, key, owner);
  if (!v.is_string()) Bad(fmt::format("{}: '{}' must be a string", owner, key));
  return v.get<std::string>();
}

double Scalar(const json& obj, const char* key, const std::string& owner,
              double factor) {
  return factor * Number(Field(obj, key, owner), owner + "." + key);
}

// A scalar broadcasts over the horizon; an array must match it.
Series ReadSeries(const json& v, int horizon, double factor,
                  const std::string& what) {
  Series out;
  if (v.is_number()) {
    out.assign(horizon, factor * v.get<double>());
  } else if (v.is_array()) {
    if (static_cast<int>(v.size()) != horizon) {
      Bad(fmt::format("{}: expected {} entries, got {}", what, horizon,
                      v.size()));
    }
    for (const json& x : v) out.push_back(factor * Number(x, what));
  } else {
    Bad(what + ": expected a number or an array");
  }
  return out;
}

Series SeriesField(const json& obj, const char* key, int horizon, double factor,
                   const std::string& owner,
                   std::optional<double> fallback = std::nullopt) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback.has_value()) return Series(horizon, *fallback);
    Bad(fmt::format("{}: missing field '{}'", owner, key));
  }
  return ReadSeries(*it, horizon, factor, owner + "." + key);
}

std::vector<std::string> ZoneList(const json& doc, const char* key) {
  const json& v = Field(doc, key, "case");
  if (!v.is_array()) Bad(fmt::format("case: '{}' must be an array", key));
  std::vector<std::string> out;
  for (const json& z : v) {
    if (!z.is_string())
      Bad(fmt::format("case: '{}' entries must be strings", key));
    out.push_back(z.get<std::string>());
  }
  return out;
}

Eigen::MatrixXd ZoneMatrix(const json& v, const std::vector<std::string>& zones,
                           int horizon, double factor,
                           const std::string& what) {
  if (!v.is_object()) Bad(what + ": expected an object keyed by zone id");
  Eigen::MatrixXd m(zones.size(), horizon);
  for (size_t z = 0; z < zones.size(); ++z) {
    auto it = v.find(zones[z]);
    if (it == v.end()) Bad(what + ": missing zone '" + zones[z] + "'");
    const Series s = ReadSeries(*it, horizon, factor, what + "." + zones[z]);
    for (int t = 0; t < horizon; ++t) m(z, t) = s[t];
  }
  for (auto it = v.begin(); it != v.end(); ++it) {
    if (std::find(zones.begin(), zones.end(), it.key()) == zones.end()) {
      throw ValidationError(what + ": unknown zone '" + it.key() + "'");
    }
  }
  return m;
}

Unit ReadUnit(const json& u, int horizon, const Units& units) {
  if (!u.is_object()) Bad("units: entries must be objects");
  const std::string id = Text(u, "id", "unit");
  const std::string owner = "unit " + id;
  const std::string type = Text(u, "type", owner);
  const double p = units.power;
  const double c = units.price;
  Unit out;
  out.id = id;
  if (type == "heat_only") {
    CheckKeys(u, {"id", "type", "heat_zone", "h_min", "h_max", "heat_cost"},
              owner);
    HeatOnlyUnit ho;
    ho.heat_zone = Text(u, "heat_zone", owner);
    ho.h_min = SeriesField(u, "h_min", horizon, p, owner, 0.0);
    ho.h_max = SeriesField(u, "h_max", horizon, p, owner);
    ho.heat_cost = SeriesField(u, "heat_cost", horizon, c, owner);
    out.kind = ho;
  } else if (type == "chp") {
    CheckKeys(u,
              {"id", "type", "heat_zone", "elec_zone", "rho_e", "rho_h",
               "fuel_max", "r", "h_min", "h_max", "heat_cost", "elec_cost"},
              owner);
    ChpUnit chp;
    chp.heat_zone = Text(u, "heat_zone", owner);
    chp.elec_zone = Text(u, "elec_zone", owner);
    chp.rho_e = Scalar(u, "rho_e", owner, 1.0);
    chp.rho_h = Scalar(u, "rho_h", owner, 1.0);
    chp.fuel_max = Scalar(u, "fuel_max", owner, p);
    chp.r = Scalar(u, "r", owner, 1.0);
    chp.h_min = SeriesField(u, "h_min", horizon, p, owner, 0.0);
    chp.h_max = SeriesField(u, "h_max", horizon, p, owner);
    chp.heat_cost = SeriesField(u, "heat_cost", horizon, c, owner);
    chp.elec_cost = SeriesField(u, "elec_cost", horizon, c, owner);
    out.kind = chp;
  } else if (type == "heat_pump") {
    CheckKeys(u,
              {"id", "type", "heat_zone", "elec_zone", "cop", "h_min", "h_max",
               "elec_cost"},
              owner);
    HeatPumpUnit hp;
    hp.heat_zone = Text(u, "heat_zone", owner);
    hp.elec_zone = Text(u, "elec_zone", owner);
    hp.cop = Scalar(u, "cop", owner, 1.0);
    hp.h_min = SeriesField(u, "h_min", horizon, p, owner, 0.0);
    hp.h_max = SeriesField(u, "h_max", horizon, p, owner);
    hp.elec_cost = SeriesField(u, "elec_cost", horizon, c, owner, 0.0);
    out.kind = hp;
  } else if (type == "elec_only") {
    CheckKeys(u, {"id", "type", "elec_zone", "e_min", "e_max", "elec_cost"},
              owner);
    ElecOnlyUnit eo;
    eo.elec_zone = Text(u, "elec_zone", owner);
    eo.e_min = SeriesField(u, "e_min", horizon, p, owner, 0.0);
    eo.e_max = SeriesField(u, "e_max", horizon, p, owner);
    eo.elec_cost = SeriesField(u, "elec_cost", horizon, c, owner, 0.0);
    out.kind = eo;
  } else {
    Bad(owner + ": unknown type '" + type + "'");
  }
  return out;
}

json SeriesJson(const Series& s) { return json(s); }

json MatrixJson(const Eigen::MatrixXd& m,
                const std::vector<std::string>& zones) {
  json out = json::object();
  for (size_t z = 0; z < zones.size(); ++z) {
    std::vector<double> row(m.cols());
    for (int t = 0; t < m.cols(); ++t) row[t] = m(z, t);
    out[zones[z]] = row;
  }
  return out;
}

}  // namespace

Case ParseCase(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    Bad(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) Bad("case: top level must be an object");
  CheckKeys(doc,
            {"header", "horizon", "elec_zones", "heat_zones", "lines", "units",
             "price_cap", "price_floor", "elec_loads", "heat_loads",
             "elec_forecast", "forecast_rel_std"},
            "case");

  Units units;
  if (auto it = doc.find("header"); it != doc.end()) {
    if (!it->is_object()) Bad("case: 'header' must be an object");
    CheckKeys(*it, {"units"}, "header");
    if (auto u = it->find("units"); u != it->end()) {
      if (!u->is_string()) Bad("header: 'units' must be a string");
      const std::string name = u->get<std::string>();
      if (name == "MWh") {
        units.power = kWhPerMWh;
        units.price = 1.0 / kWhPerMWh;
      } else if (name != "Wh") {
        Bad("header: units must be \"Wh\" or \"MWh\"");
      }
    }
  }

  Case c;
  EnergySystem& sys = c.system;
  if (auto it = doc.find("horizon"); it != doc.end()) {
    if (!it->is_number_integer()) Bad("case: 'horizon' must be an integer");
    sys.horizon = it->get<int>();
  }
  if (sys.horizon < 1) throw ValidationError("horizon >= 1 violated");
  const int horizon = sys.horizon;
  sys.elec_zones = ZoneList(doc, "elec_zones");
  sys.heat_zones = ZoneList(doc, "heat_zones");

  if (auto it = doc.find("lines"); it != doc.end()) {
    if (!it->is_array()) Bad("case: 'lines' must be an array");
    for (const json& l : *it) {
      if (!l.is_object()) Bad("lines: entries must be objects");
      TransmissionLine line;
      line.id = Text(l, "id", "line");
      const std::string owner = "line " + line.id;
      CheckKeys(l, {"id", "from", "to", "tc_min", "tc_max"}, owner);
      line.from_zone = Text(l, "from", owner);
      line.to_zone = Text(l, "to", owner);
      line.tc_max = SeriesField(l, "tc_max", horizon, units.power, owner);
      if (l.contains("tc_min")) {
        line.tc_min = SeriesField(l, "tc_min", horizon, units.power, owner);
      } else {
        line.tc_min = line.tc_max;
        for (double& v : line.tc_min) v = -v;
      }
      sys.lines.push_back(std::move(line));
    }
  }

  const json& unit_list = Field(doc, "units", "case");
  if (!unit_list.is_array()) Bad("case: 'units' must be an array");
  for (const json& u : unit_list) {
    sys.units.push_back(ReadUnit(u, horizon, units));
  }

  const bool has_cap = doc.contains("price_cap");
  const bool has_floor = doc.contains("price_floor");
  if (has_cap) sys.price_cap = Scalar(doc, "price_cap", "case", units.price);
  if (has_floor) {
    sys.price_floor = Scalar(doc, "price_floor", "case", units.price);
  }
  if (auto it = doc.find("elec_forecast"); it != doc.end()) {
    PublicForecast f;
    f.elec =
        ZoneMatrix(*it, sys.elec_zones, horizon, units.power, "elec_forecast");
    if (doc.contains("forecast_rel_std")) {
      f.rel_std = Scalar(doc, "forecast_rel_std", "case", 1.0);
    }
    sys.forecast = std::move(f);
  }
  sys.Validate();

  c.loads.elec = ZoneMatrix(Field(doc, "elec_loads", "case"), sys.elec_zones,
                            horizon, units.power, "elec_loads");
  c.loads.heat = ZoneMatrix(Field(doc, "heat_loads", "case"), sys.heat_zones,
                            horizon, units.power, "heat_loads");
  c.loads.Validate(sys);
  return c;
}

std::string SerializeCase(const Case& c) {
  const EnergySystem& sys = c.system;
  json doc;
  doc["header"] = {{"units", "Wh"}};
  doc["horizon"] = sys.horizon;
  doc["elec_zones"] = sys.elec_zones;
  doc["heat_zones"] = sys.heat_zones;
  if (sys.price_cap) doc["price_cap"] = *sys.price_cap;
  if (sys.price_floor) doc["price_floor"] = *sys.price_floor;
  json lines = json::array();
  for (const auto& l : sys.lines) {
    lines.push_back({{"id", l.id},
                     {"from", l.from_zone},
                     {"to", l.to_zone},
                     {"tc_min", SeriesJson(l.tc_min)},
                     {"tc_max", SeriesJson(l.tc_max)}});
  }
  doc["lines"] = lines;
  json units = json::array();
  for (const Unit& u : sys.units) {
    json j;
    j["id"] = u.id;
    if (const auto* ho = std::get_if<HeatOnlyUnit>(&u.kind)) {
      j["type"] = "heat_only";
      j["heat_zone"] = ho->heat_zone;
      j["h_min"] = SeriesJson(ho->h_min);
      j["h_max"] = SeriesJson(ho->h_max);
      j["heat_cost"] = SeriesJson(ho->heat_cost);
    } else if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      j["type"] = "chp";
      j["heat_zone"] = chp->heat_zone;
      j["elec_zone"] = chp->elec_zone;
      j["rho_e"] = chp->rho_e;
      j["rho_h"] = chp->rho_h;
      j["fuel_max"] = chp->fuel_max;
      j["r"] = chp->r;
      j["h_min"] = SeriesJson(chp->h_min);
      j["h_max"] = SeriesJson(chp->h_max);
      j["heat_cost"] = SeriesJson(chp->heat_cost);
      j["elec_cost"] = SeriesJson(chp->elec_cost);
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      j["type"] = "heat_pump";
      j["heat_zone"] = hp->heat_zone;
      j["elec_zone"] = hp->elec_zone;
      j["cop"] = hp->cop;
      j["h_min"] = SeriesJson(hp->h_min);
      j["h_max"] = SeriesJson(hp->h_max);
      j["elec_cost"] = SeriesJson(hp->elec_cost);
    } else {
      const auto& eo = std::get<ElecOnlyUnit>(u.kind);
      j["type"] = "elec_only";
      j["elec_zone"] = eo.elec_zone;
      j["e_min"] = SeriesJson(eo.e_min);
      j["e_max"] = SeriesJson(eo.e_max);
      j["elec_cost"] = SeriesJson(eo.elec_cost);
    }
    units.push_back(j);
  }
  doc["units"] = units;
  doc["elec_loads"] = MatrixJson(c.loads.elec, sys.elec_zones);
  doc["heat_loads"] = MatrixJson(c.loads.heat, sys.heat_zones);
  if (sys.forecast) {
    doc["elec_forecast"] = MatrixJson(sys.forecast->elec, sys.elec_zones);
    doc["forecast_rel_std"] = sys.forecast->rel_std;
  }
  return doc.dump(1) + "\n";
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << contents;
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

Case LoadCase(const std::string& path) { return ParseCase(ReadFile(path)); }

void SaveCase(const Case& c, const std::string& path) {
  WriteFile(path, SerializeCase(c));
}

}  // namespace dpsc
