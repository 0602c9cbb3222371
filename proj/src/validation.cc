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

#include "dpsc/validation.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <variant>

#include <fmt/format.h>

#include "dpsc/common.h"
#include "dpsc/fixtures.h"
#include "dpsc/lp.h"
#include "dpsc/markets.h"
#include "dpsc/oracles.h"
#include "dpsc/privacy.h"
#include "dpsc/rng.h"

namespace dpsc {

namespace {

constexpr double kObjTol = 1e-8;
constexpr double kKktTol = 1e-7;

double WorstResidual(const KktReport& r) {
  return std::max({r.primal, r.bounds, r.stationarity, r.dual_sign,
                   r.complementarity, r.relative_gap});
}

// Width of the heat range of the toy's coupling unit.
double CouplingSpan(const EnergySystem& sys) {
  double span = 0.0;
  for (const Unit& u : sys.units) {
    if (const auto* chp = std::get_if<ChpUnit>(&u.kind)) {
      span = chp->h_max[0] - chp->h_min[0];
    } else if (const auto* hp = std::get_if<HeatPumpUnit>(&u.kind)) {
      span = hp->h_max[0] - hp->h_min[0];
    }
  }
  return span;
}

// Solver result as reported to the comparison, with the injected fault.
double Faulted(double value, const ValidationOptions& opt) {
  return value + opt.fault * std::max(1.0, std::abs(value));
}

std::uint64_t ToySeed(const ValidationOptions& opt, int i) {
  return DeriveSeed(opt.seed, static_cast<std::uint64_t>(i));
}

}  // namespace

std::vector<ValidationCheck> LpSuite(const ValidationOptions& opt) {
  std::vector<ValidationCheck> out;
  std::mt19937_64 rng(opt.seed);
  for (int i = 0; i < opt.lp_instances; ++i) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int m = 1 + static_cast<int>(rng() % std::min(n - 1, 4));
    const LpProblem p = fixtures::RandomLp(rng, n, m, i % 2 == 1);
    ValidationCheck c{"lp", i, false, 0.0, kObjTol, ""};
    const LpSolution s = SolveLp(p);
    const VertexOracleResult o = LpVertexOracle(p);
    if (o.status != OracleStatus::kOptimal) {
      const bool same = (o.status == OracleStatus::kUnbounded)
                            ? s.status == LpStatus::kUnbounded
                            : s.status == LpStatus::kInfeasible;
      c.passed = same && opt.fault == 0.0;
      c.error = c.passed ? 0.0 : kInf;
      c.detail = fmt::format("oracle {} solver {}", ToString(o.status),
                             ToString(s.status));
    } else if (!s.optimal()) {
      c.error = kInf;
      c.detail = fmt::format("oracle optimal solver {}", ToString(s.status));
    } else {
      const double kkt = WorstResidual(VerifyKkt(p, s));
      c.error = std::abs(Faulted(s.obj, opt) - o.obj);
      c.passed = c.error <= kObjTol && kkt <= kKktTol;
      c.detail = fmt::format("n={} m={} kkt={:.3g}", n, m, kkt);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ValidationCheck> LeaderSuite(const ValidationOptions& opt) {
  std::vector<ValidationCheck> out;
  LeaderOptions lo;
  lo.method = LeaderMethod::kBinaryExpansion;
  lo.k_bits = opt.k_bits;
  for (int i = 0; i < opt.leader_instances; ++i) {
    const Case toy = fixtures::RandomToyCase(ToySeed(opt, i), i % 2 == 0);
    const EnergySystem& sys = toy.system;
    OracleConfig cfg;
    cfg.grid_step = 0.1 * CouplingSpan(sys) / std::ldexp(1.0, lo.k_bits);
    const BilevelOracleResult ref = BilevelGridOracle(sys, toy.loads, 0, cfg);
    ValidationCheck c{"leader", i, false, 0.0, 0.0, ""};
    if (!ref.feasible) {
      try {
        SolveLeaderBilevel(sys, toy.loads, lo);
        c.detail = "oracle infeasible, solver returned";
        c.error = kInf;
      } catch (const InfeasibleError&) {
        c.passed = opt.fault == 0.0;
        c.detail = "both infeasible";
      }
      out.push_back(std::move(c));
      continue;
    }
    const LeaderOutcome l = SolveLeaderBilevel(sys, toy.loads, lo);
    c.error = std::abs(Faulted(l.cost, opt) - ref.objective);
    c.tolerance = l.discretization_gap +
                  lo.mip_gap * std::max(1.0, std::abs(l.cost)) +
                  1e-6 * (1.0 + std::abs(l.cost));
    c.passed = c.error <= c.tolerance;
    c.detail =
        fmt::format("{} cost={:.6f} oracle={:.6f} nodes={}",
                    i % 2 == 0 ? "chp" : "hp", l.cost, ref.objective, l.nodes);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ValidationCheck> FidelitySuite(const ValidationOptions& opt) {
  std::vector<ValidationCheck> out;
  const double step = ToWh(0.01);
  LeaderOptions lo;
  lo.method = LeaderMethod::kPriceEnumeration;
  for (int i = 0; i < opt.fidelity_instances; ++i) {
    const std::uint64_t seed = ToySeed(opt, i);
    const Case toy = fixtures::RandomToyCase(seed, i % 2 == 0);
    const EnergySystem& sys = toy.system;
    ValidationCheck c{"fidelity", i, false, 0.0, step + 1e-3, ""};
    LeaderOutcome lead;
    try {
      lead = SolveLeaderBilevel(sys, toy.loads, lo);
    } catch (const InfeasibleError&) {
      c.passed = opt.fault == 0.0;
      c.detail = "toy infeasible, skipped";
      out.push_back(std::move(c));
      continue;
    }
    const FollowerPrediction f =
        PredictFollower(sys, toy.loads.elec, lead.bounds);
    const FidelityTargets t{lead.bounds, f.hourly_cost, f.lambda};
    PrivacyParams p;
    p.eta_p = 0.05;
    p.eta_d = 0.05;
    CounterRng rng(seed, 9);
    Eigen::MatrixXd d_tilde = toy.loads.elec;
    d_tilde(0, 0) += ToWh(rng.Uniform(-60, 60));
    std::vector<double> e_min(sys.units.size());
    std::vector<double> e_max(sys.units.size());
    for (size_t j = 0; j < sys.units.size(); ++j) {
      e_min[j] = lead.bounds.e_min(j, 0);
      e_max[j] = lead.bounds.e_max(j, 0);
    }
    OracleConfig cfg;
    cfg.grid_step = step;
    try {
      const FidelityResult r = RecoverFidelity(sys, d_tilde, t, p);
      const FidelityOracleResult o = FidelityGridOracle(
          sys, 0, d_tilde(0, 0), e_min, e_max, t.omega_bar[0],
          t.lambda_bar(0, 0), r.bands.eta_p[0], r.bands.eta_d(0, 0), ToWh(400),
          cfg);
      if (!o.feasible) {
        c.error = kInf;
        c.detail = "oracle found no point, solver did";
      } else {
        c.error = std::abs(Faulted(r.d_hat(0, 0), opt) - o.d_hat);
        const bool residuals_ok =
            r.price_residual <= ToEurPerWh(1e-6) && r.cost_residual <= 1e-6;
        c.passed = c.error <= c.tolerance && residuals_ok;
        c.detail = fmt::format("d_hat={:.6f} oracle={:.6f} MWh",
                               ToMWh(r.d_hat(0, 0)), ToMWh(o.d_hat));
      }
    } catch (const FidelityError& e) {
      c.error = kInf;
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ValidationCheck> RunValidation(const ValidationOptions& opt) {
  std::vector<ValidationCheck> out = LpSuite(opt);
  for (auto* suite : {&LeaderSuite, &FidelitySuite}) {
    std::vector<ValidationCheck> more = suite(opt);
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

bool AllPassed(const std::vector<ValidationCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(),
                     [](const ValidationCheck& c) { return c.passed; });
}

std::string ValidationCsv(const std::vector<ValidationCheck>& checks) {
  std::string out = "suite,instance,passed,error,tolerance,detail\n";
  for (const ValidationCheck& c : checks) {
    std::string detail = c.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    std::replace(detail.begin(), detail.end(), '\n', ' ');
    out +=
        fmt::format("{},{},{},{:.9g},{:.9g},{}\n", c.suite, c.instance,
                    c.passed ? "true" : "false", c.error, c.tolerance, detail);
  }
  return out;
}

}  // namespace dpsc
