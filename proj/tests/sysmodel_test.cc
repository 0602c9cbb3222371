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

#include "dpsc/sysmodel.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "dpsc/case_io.h"
#include "dpsc/common.h"
#include "test_util.h"

namespace dpsc {
namespace {

using ::testing::HasSubstr;
using testing::TestDataPath;

std::string ValidationMessage(const std::string& file) {
  try {
    LoadCase(TestDataPath(file));
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(CaseIoTest, MinimalCaseParses) {
  const Case c = LoadCase(TestDataPath("minimal_case.json"));
  EXPECT_EQ(c.system.horizon, 1);
  ASSERT_EQ(c.system.units.size(), 1u);
  EXPECT_DOUBLE_EQ(c.loads.elec(0, 0), ToWh(40.0));
  const auto& g = std::get<ElecOnlyUnit>(c.system.units[0].kind);
  EXPECT_DOUBLE_EQ(g.e_max[0], ToWh(100.0));
  EXPECT_DOUBLE_EQ(g.elec_cost[0], ToEurPerWh(10.0));
  EXPECT_DOUBLE_EQ(g.e_min[0], 0.0);
}

TEST(CaseIoTest, ChpWithZeroRatioIsRejected) {
  EXPECT_THAT(ValidationMessage("chp_r_zero.json"),
              HasSubstr("R > 0 violated"));
  EXPECT_THAT(ValidationMessage("chp_r_zero.json"), HasSubstr("C1"));
}

TEST(CaseIoTest, RoundTripIsIdentity) {
  for (const char* file : {"minimal_case.json", "two_zone_case.json"}) {
    const Case c = LoadCase(TestDataPath(file));
    const Case again = ParseCase(SerializeCase(c));
    EXPECT_TRUE(again == c) << file;
    EXPECT_EQ(SerializeCase(again), SerializeCase(c));
  }
  const Case synth = SynthCase(3);
  EXPECT_TRUE(ParseCase(SerializeCase(synth)) == synth);
}

TEST(CaseIoTest, OptionalFieldsAndBroadcast) {
  const Case c = LoadCase(TestDataPath("two_zone_case.json"));
  ASSERT_TRUE(c.system.has_price_limits());
  EXPECT_DOUBLE_EQ(*c.system.price_cap, ToEurPerWh(200.0));
  ASSERT_TRUE(c.system.forecast.has_value());
  EXPECT_DOUBLE_EQ(c.system.forecast->elec(1, 1), ToWh(44.0));
  EXPECT_DOUBLE_EQ(c.system.lines[0].tc_min[1], ToWh(-5.0));
  const auto& wind = std::get<ElecOnlyUnit>(c.system.units[2].kind);
  EXPECT_DOUBLE_EQ(wind.e_max[1], ToWh(7.0));
  EXPECT_DOUBLE_EQ(wind.elec_cost[0], 0.0);
}

TEST(CaseIoTest, MalformedDocumentsAreParseErrors) {
  EXPECT_THROW(ParseCase("{not json"), ParseError);
  EXPECT_THROW(ParseCase("[]"), ParseError);
  EXPECT_THROW(ParseCase(R"({"elec_zones": ["Z"], "heat_zones": []})"),
               ParseError);
  EXPECT_THROW(LoadCase("/nonexistent/case.json"), ValidationError);
}

TEST(CaseIoTest, UnknownFieldsAreRejected) {
  const std::string base = ReadFile(TestDataPath("minimal_case.json"));
  auto error = [&](const std::string& from, const std::string& to) {
    std::string doc = base;
    doc.replace(doc.find(from), from.size(), to);
    try {
      ParseCase(doc);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_THAT(error("\"horizon\"", "\"horizn\": 1, \"horizon\""),
              HasSubstr("case: unknown field 'horizn'"));
  EXPECT_THAT(error("\"e_max\"", "\"emax\": 5, \"e_max\""),
              HasSubstr("unit G1: unknown field 'emax'"));
  EXPECT_THAT(error("\"MWh\"}", "\"MWh\", \"scale\": 2}"),
              HasSubstr("header: unknown field 'scale'"));
}

TEST(CaseIoTest, InvariantViolationsNameTheCulprit) {
  const std::string base = ReadFile(TestDataPath("minimal_case.json"));
  auto with = [&](const std::string& from, const std::string& to) {
    std::string doc = base;
    doc.replace(doc.find(from), from.size(), to);
    try {
      ParseCase(doc);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_THAT(with("\"elec_zone\": \"Z1\"", "\"elec_zone\": \"Z9\""),
              HasSubstr("unknown electricity zone 'Z9'"));
  EXPECT_THAT(with("\"e_max\": 100", "\"e_min\": 200, \"e_max\": 100"),
              HasSubstr("Emin <= Emax violated"));
  EXPECT_THAT(with("[40]", "[-1]"), HasSubstr("L^E >= 0 violated"));
  EXPECT_THAT(with("\"horizon\": 1", "\"horizon\": 0"),
              HasSubstr("horizon >= 1"));
  EXPECT_THAT(with("\"heat_zones\": []", "\"heat_zones\": [\"H\"]"),
              HasSubstr("heat-only unit required"));
}

TEST(SysmodelTest, ChpElecBounds) {
  ChpUnit chp;
  chp.rho_e = 2.0;
  chp.rho_h = 1.0;
  chp.fuel_max = 100.0;
  chp.r = 0.5;
  const ElecBounds zero = ChpElecBounds(0.0, chp);
  EXPECT_DOUBLE_EQ(zero.e_min, 0.0);
  EXPECT_DOUBLE_EQ(zero.e_max, 50.0);
  const ElecBounds ten = ChpElecBounds(10.0, chp);
  EXPECT_DOUBLE_EQ(ten.e_min, 20.0);
  EXPECT_DOUBLE_EQ(ten.e_max, 45.0);
  EXPECT_THROW(ChpElecBounds(101.0, chp), ValidationError);
  EXPECT_THROW(ChpElecBounds(-1.0, chp), ValidationError);
}

TEST(SysmodelTest, ChpConsistencyThreshold) {
  ChpUnit chp;
  chp.rho_e = 1.0;
  chp.rho_h = 0.25;
  chp.fuel_max = 90.0;
  chp.r = 2.0;
  const double cap = ChpMaxConsistentHeat(chp);
  EXPECT_DOUBLE_EQ(cap, 120.0);
  const ElecBounds at = ChpElecBounds(cap, chp);
  EXPECT_NEAR(at.e_min, at.e_max, 1e-12);
  const ElecBounds below = ChpElecBounds(cap - 1.0, chp);
  EXPECT_LT(below.e_min, below.e_max);
  const ElecBounds above = ChpElecBounds(cap + 1.0, chp);
  EXPECT_GT(above.e_min, above.e_max);
}

TEST(SysmodelTest, HpElecBounds) {
  HeatPumpUnit hp;
  hp.cop = 3.0;
  const ElecBounds zero = HpElecBounds(0.0, hp);
  EXPECT_EQ(zero.e_min, 0.0);
  EXPECT_EQ(zero.e_max, 0.0);
  const ElecBounds b = HpElecBounds(30.0, hp);
  EXPECT_DOUBLE_EQ(b.e_min, -10.0);
  EXPECT_DOUBLE_EQ(b.e_max, -10.0);
  EXPECT_THROW(HpElecBounds(-1.0, hp), ValidationError);
}

TEST(SysmodelTest, ApplyStress) {
  const Case c = SynthCase(1);
  const LoadData same = ApplyStress(c.loads, 1.0, 1.0);
  EXPECT_TRUE(same == c.loads);
  const LoadData s = ApplyStress(c.loads, 1.3, 2.0);
  for (int z = 0; z < s.heat.rows(); ++z) {
    for (int t = 0; t < s.heat.cols(); ++t) {
      EXPECT_EQ(s.heat(z, t), c.loads.heat(z, t) * 1.3);
    }
  }
  for (int z = 0; z < s.elec.rows(); ++z) {
    for (int t = 0; t < s.elec.cols(); ++t) {
      EXPECT_EQ(s.elec(z, t), c.loads.elec(z, t) * 2.0);
    }
  }
  EXPECT_THROW(ApplyStress(c.loads, 1.0, 0.0), ValidationError);
  EXPECT_THROW(ApplyStress(c.loads, -1.0, 1.0), ValidationError);
}

TEST(SysmodelTest, ApplyStressComposes) {
  // Powers of two keep every product exact in binary floating point.
  const Case c = SynthCase(2);
  const LoadData twice = ApplyStress(ApplyStress(c.loads, 2.0, 0.5), 0.25, 4.0);
  EXPECT_TRUE(twice == ApplyStress(c.loads, 0.5, 2.0));
}

TEST(SysmodelTest, StressScalesForecast) {
  const Case c = SynthCase(4);
  const Case s = ApplyStress(c, 1.5, 2.0);
  ASSERT_TRUE(s.system.forecast.has_value());
  EXPECT_EQ(s.system.forecast->elec(0, 3), c.system.forecast->elec(0, 3) * 2.0);
}

TEST(SynthTest, DeterministicInSeed) {
  EXPECT_TRUE(SynthCase(42) == SynthCase(42));
  EXPECT_EQ(SerializeCase(SynthCase(42)), SerializeCase(SynthCase(42)));
  EXPECT_FALSE(SynthCase(42) == SynthCase(43));
}

TEST(SynthTest, SmallSpecPassesValidation) {
  SynthSpec spec;
  spec.elec_zones = 2;
  spec.heat_zones = 2;
  spec.chp = 2;
  spec.heat_pumps = 1;
  spec.heat_only = 2;
  spec.elec_only = 4;
  const Case c = SynthCase(9, spec);
  const Case reloaded = ParseCase(SerializeCase(c));
  EXPECT_EQ(reloaded.system.units.size(), c.system.units.size());
}

TEST(SynthTest, AggregateDemandStaysInBand) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Case c = SynthCase(seed);
    double lo = kInf;
    double hi = 0.0;
    for (int t = 0; t < c.system.horizon; ++t) {
      const double total = ToMWh(c.loads.elec.col(t).sum());
      EXPECT_GE(total, 644.47 - 1e-9);
      EXPECT_LE(total, 2498.54 + 1e-9);
      lo = std::min(lo, total);
      hi = std::max(hi, total);
    }
    // The profile spans most of the band.
    EXPECT_LT(lo, 700.0);
    EXPECT_GT(hi, 2400.0);
  }
}

TEST(SynthTest, RejectsSpecWithoutHeatOnlyCoverage) {
  SynthSpec spec;
  spec.heat_zones = 3;
  spec.heat_only = 2;
  EXPECT_THROW(SynthCase(1, spec), ValidationError);
}

}  // namespace
}  // namespace dpsc
