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

// Python module _dpsc. Arrays cross the boundary in MWh and EUR/MWh; the
// library works in Wh and EUR/Wh internally.

#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpsc/case_io.h"
#include "dpsc/common.h"
#include "dpsc/experiments.h"
#include "dpsc/lp.h"
#include "dpsc/markets.h"
#include "dpsc/outcome_io.h"
#include "dpsc/privacy.h"
#include "dpsc/sysmodel.h"

namespace py = pybind11;

namespace dpsc {
namespace {

Eigen::MatrixXd Mwh(const Eigen::MatrixXd& wh) { return wh / kWhPerMWh; }
Eigen::MatrixXd PerMwh(const Eigen::MatrixXd& per_wh) {
  return per_wh * kWhPerMWh;
}

LeaderMethod ParseLeader(const std::string& name) {
  if (name == "enumeration") return LeaderMethod::kPriceEnumeration;
  if (name == "milp") return LeaderMethod::kBinaryExpansion;
  throw ValidationError("leader must be 'enumeration' or 'milp', got '" + name +
                        "'");
}

std::string LeaderName(LeaderMethod m) {
  return m == LeaderMethod::kPriceEnumeration ? "enumeration" : "milp";
}

BudgetSplit ParseSplit(const std::string& name) {
  if (name == "per_hour") return BudgetSplit::kPerHourProportional;
  if (name == "coupled") return BudgetSplit::kCoupled;
  throw ValidationError("budget_split must be 'per_hour' or 'coupled', got '" +
                        name + "'");
}

LeaderOptions Leader(const std::string& name, int k_bits) {
  LeaderOptions o;
  o.method = ParseLeader(name);
  o.k_bits = k_bits;
  return o;
}

Eigen::MatrixXd LoadsFromMwh(const Case& c, const Eigen::MatrixXd& mwh) {
  if (mwh.rows() != c.loads.elec.rows() || mwh.cols() != c.loads.elec.cols()) {
    throw ValidationError("loads must be elec zones x horizon");
  }
  return mwh * kWhPerMWh;
}

py::dict MetricsDict(const PrivacyMetrics& m) {
  py::dict d;
  d["failed"] = m.failed;
  d["failure"] = m.failure;
  d["delta_d_mwh"] = m.delta_d;
  d["delta_omega_l_pct"] = m.delta_omega_l;
  d["delta_omega_f_pct"] = m.delta_omega_f;
  return d;
}

py::dict SummaryDict(const Summary& s) {
  py::dict d;
  d["instances"] = s.instances;
  d["failures"] = s.failures;
  d["mean_delta_d"] = s.mean_delta_d;
  d["mean_delta_omega_l"] = s.mean_delta_omega_l;
  d["mean_delta_omega_f"] = s.mean_delta_omega_f;
  d["median_delta_d"] = s.median_delta_d;
  d["median_delta_omega_l"] = s.median_delta_omega_l;
  d["median_delta_omega_f"] = s.median_delta_omega_f;
  return d;
}

ExperimentConfig Experiment(const std::optional<Case>& base, int seeds,
                            std::uint64_t master_seed, int workers,
                            const PrivacyParams& params, bool zero_noise) {
  ExperimentConfig cfg;
  cfg.base = base;
  cfg.seeds = seeds;
  cfg.master_seed = master_seed;
  cfg.workers = workers;
  cfg.privacy = params;
  cfg.zero_noise = zero_noise;
  return cfg;
}

}  // namespace
}  // namespace dpsc

PYBIND11_MODULE(_dpsc, m) {
  using namespace dpsc;  // NOLINT
  m.doc() = "Privacy-preserving coordination of heat and electricity markets";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<SolverError>(m, "SolverError", error.ptr());
  auto infeasible = py::register_exception<InfeasibleError>(
      m, "InfeasibleError", error.ptr());
  py::register_exception<FidelityError>(m, "FidelityError", infeasible.ptr());

  py::class_<Case>(m, "Case")
      .def_property_readonly("horizon",
                             [](const Case& c) { return c.system.horizon; })
      .def_property_readonly("elec_zones",
                             [](const Case& c) { return c.system.elec_zones; })
      .def_property_readonly("heat_zones",
                             [](const Case& c) { return c.system.heat_zones; })
      .def_property_readonly("unit_ids",
                             [](const Case& c) { return UnitNames(c.system); })
      .def_property_readonly("elec_loads_mwh",
                             [](const Case& c) { return Mwh(c.loads.elec); })
      .def_property_readonly("heat_loads_mwh",
                             [](const Case& c) { return Mwh(c.loads.heat); })
      .def(
          "stressed",
          [](const Case& c, double eta_h, double eta_e) {
            return ApplyStress(c, eta_h, eta_e);
          },
          py::arg("eta_h"), py::arg("eta_e"),
          "Copy with heat loads scaled by eta_h and electricity loads by "
          "eta_e.")
      .def(
          "with_elec_loads",
          [](Case c, const Eigen::MatrixXd& mwh) {
            c.loads.elec = LoadsFromMwh(c, mwh);
            return c;
          },
          py::arg("elec_loads_mwh"))
      .def("to_json", [](const Case& c) { return SerializeCase(c); })
      .def("__eq__", [](const Case& a, const Case& b) { return a == b; })
      .def("__repr__", [](const Case& c) {
        return "<dpsc.Case horizon=" + std::to_string(c.system.horizon) +
               " units=" + std::to_string(c.system.units.size()) + ">";
      });

  m.def(
      "synth_case", [](std::uint64_t seed) { return SynthCase(seed); },
      py::arg("seed") = 0, "Synthetic two-zone case for a seed.");
  m.def("load_case", &LoadCase, py::arg("path"));
  m.def("parse_case", &ParseCase, py::arg("json_text"));

  py::class_<PrivacyParams>(m, "PrivacyParams")
      .def(py::init([](double epsilon, double alpha_mwh, int w, double eta_p,
                       double eta_d, std::uint64_t seed,
                       const std::string& budget_split, bool fuse_forecast,
                       const std::string& leader, int k_bits) {
             PrivacyParams p;
             p.epsilon = epsilon;
             p.alpha = ToWh(alpha_mwh);
             p.w = w;
             p.eta_p = eta_p;
             p.eta_d = eta_d;
             p.seed = seed;
             p.budget_split = ParseSplit(budget_split);
             p.fuse_forecast = fuse_forecast;
             p.leader.method = ParseLeader(leader);
             p.leader.k_bits = k_bits;
             p.Validate(0);
             return p;
           }),
           py::kw_only(), py::arg("epsilon") = 1.0, py::arg("alpha_mwh") = 10.0,
           py::arg("w") = 24, py::arg("eta_p") = 0.001, py::arg("eta_d") = 0.1,
           py::arg("seed") = 0, py::arg("budget_split") = "per_hour",
           py::arg("fuse_forecast") = true, py::arg("leader") = "enumeration",
           py::arg("k_bits") = 8)
      .def_readwrite("epsilon", &PrivacyParams::epsilon)
      .def_readwrite("w", &PrivacyParams::w)
      .def_readwrite("eta_p", &PrivacyParams::eta_p)
      .def_readwrite("eta_d", &PrivacyParams::eta_d)
      .def_readwrite("seed", &PrivacyParams::seed)
      .def_readwrite("fuse_forecast", &PrivacyParams::fuse_forecast)
      .def_property(
          "alpha_mwh", [](const PrivacyParams& p) { return ToMWh(p.alpha); },
          [](PrivacyParams& p, double a) { p.alpha = ToWh(a); })
      .def_property(
          "budget_split",
          [](const PrivacyParams& p) {
            return p.budget_split == BudgetSplit::kCoupled ? "coupled"
                                                           : "per_hour";
          },
          [](PrivacyParams& p, const std::string& s) {
            p.budget_split = ParseSplit(s);
          })
      .def_property(
          "leader",
          [](const PrivacyParams& p) { return LeaderName(p.leader.method); },
          [](PrivacyParams& p, const std::string& s) {
            p.leader.method = ParseLeader(s);
          })
      .def_property(
          "k_bits", [](const PrivacyParams& p) { return p.leader.k_bits; },
          [](PrivacyParams& p, int k) { p.leader.k_bits = k; })
      .def_property_readonly(
          "scale_mwh", [](const PrivacyParams& p) { return ToMWh(p.scale()); })
      .def("validate", &PrivacyParams::Validate, py::arg("horizon") = 0)
      .def("to_json",
           [](const PrivacyParams& p) { return PrivacyParamsJson(p); });

  m.def(
      "clear",
      [](const Case& c, const std::string& leader, int k_bits) {
        LeaderOutcome l;
        {
          py::gil_scoped_release release;
          l = SolveLeaderBilevel(c.system, c.loads, Leader(leader, k_bits));
        }
        py::dict d;
        d["leader_cost_eur"] = l.cost;
        d["follower_cost_eur"] = l.follower.cost;
        d["discretization_gap_eur"] = l.discretization_gap;
        d["hourly_leader_cost_eur"] = Eigen::VectorXd(l.hourly_cost);
        d["heat_mwh"] = Mwh(l.h);
        d["dispatch_mwh"] = Mwh(l.follower.e);
        d["flow_mwh"] = Mwh(l.follower.f);
        d["price_eur_per_mwh"] = PerMwh(l.follower.lambda);
        d["report_json"] = LeaderReportJson(c.system, l);
        return d;
      },
      py::arg("case"), py::arg("leader") = "enumeration", py::arg("k_bits") = 8,
      "Clears the leader heat market and the follower electricity market.");

  m.def(
      "obfuscate",
      [](const Eigen::MatrixXd& elec_loads_mwh, const PrivacyParams& p) {
        return Mwh(ObfuscateStream(elec_loads_mwh * kWhPerMWh, p).d_tilde);
      },
      py::arg("elec_loads_mwh"), py::arg("params"),
      "Adds Laplace(w alpha / epsilon) noise to every (zone, hour) cell.");

  m.def(
      "run_ppsm",
      [](const Case& c, const PrivacyParams& p, bool zero_noise) {
        PpsmTrace tr;
        {
          py::gil_scoped_release release;
          PpsmHooks hooks;
          hooks.zero_noise = zero_noise;
          tr = RunPpsm(c.system, c.loads.heat, c.loads.elec, p, hooks);
        }
        const FidelityResult& f = tr.fidelity;
        py::dict d;
        d["scale_mwh"] = ToMWh(tr.obfuscation.scale);
        d["d_tilde_mwh"] = Mwh(tr.obfuscation.d_tilde);
        d["prediction_loads_mwh"] = Mwh(tr.prediction_loads);
        d["predicted_price_eur_per_mwh"] = PerMwh(tr.follower.lambda);
        d["predicted_hourly_cost_eur"] =
            Eigen::VectorXd(tr.follower.hourly_cost);
        d["d_hat_mwh"] = Mwh(f.d_hat);
        d["price_eur_per_mwh"] = PerMwh(f.lambda_hat);
        d["hourly_cost_eur"] = Eigen::VectorXd(f.omega_hat);
        d["eta_p_eur"] = Eigen::VectorXd(f.bands.eta_p);
        d["eta_d_eur_per_mwh"] = PerMwh(f.bands.eta_d);
        d["price_residual_eur_per_mwh"] = ToEurPerMWh(f.price_residual);
        d["cost_residual_eur"] = f.cost_residual;
        d["distance_mwh2"] = f.distance;
        d["report_json"] = PpsmReportJson(c.system, tr, p);
        return d;
      },
      py::arg("case"), py::arg("params"), py::arg("zero_noise") = false,
      "Obfuscation, prediction and fidelity recovery on one case.");

  m.def(
      "cost_of_privacy",
      [](const Case& c, const Eigen::MatrixXd& released_mwh,
         const std::string& leader, int k_bits) {
        const Eigen::MatrixXd d = LoadsFromMwh(c, released_mwh);
        PrivacyMetrics r;
        {
          py::gil_scoped_release release;
          r = CostOfPrivacy(c.system, c.loads, d, Leader(leader, k_bits));
        }
        return MetricsDict(r);
      },
      py::arg("case"), py::arg("released_mwh"),
      py::arg("leader") = "enumeration", py::arg("k_bits") = 8);

  m.def(
      "table1",
      [](const std::vector<double>& alphas_mwh, int seeds,
         std::uint64_t master_seed, int workers,
         const std::optional<PrivacyParams>& params,
         const std::optional<Case>& base, bool zero_noise) {
        const ExperimentConfig cfg =
            Experiment(base, seeds, master_seed, workers,
                       params.value_or(PrivacyParams{}), zero_noise);
        std::vector<double> alphas;
        for (double a : alphas_mwh) alphas.push_back(ToWh(a));
        std::vector<Table1Row> rows;
        {
          py::gil_scoped_release release;
          rows = RunTable1(cfg, alphas);
        }
        py::list out;
        for (const Table1Row& r : rows) {
          py::dict d = SummaryDict(r.summary);
          d["mechanism"] = ToString(r.mechanism);
          d["alpha_mwh"] = ToMWh(r.alpha);
          out.append(d);
        }
        return out;
      },
      py::arg("alphas_mwh") = std::vector<double>{10.0, 50.0, 100.0},
      py::arg("seeds") = 20, py::arg("master_seed") = 0, py::arg("workers") = 1,
      py::arg("params") = py::none(), py::arg("base") = py::none(),
      py::arg("zero_noise") = false,
      "Laplace and PPSM cost of privacy for each alpha.");

  m.def(
      "stress_sweep",
      [](const std::vector<double>& eta_h, const std::vector<double>& eta_e,
         double alpha_mwh, int seeds, std::uint64_t master_seed, int workers,
         const std::optional<PrivacyParams>& params,
         const std::optional<Case>& base) {
        PrivacyParams p = params.value_or(PrivacyParams{});
        p.alpha = ToWh(alpha_mwh);
        const ExperimentConfig cfg =
            Experiment(base, seeds, master_seed, workers, p, false);
        std::vector<StressRow> rows;
        {
          py::gil_scoped_release release;
          rows = RunStressSweep(cfg, eta_h, eta_e);
        }
        py::list out;
        for (const StressRow& r : rows) {
          py::dict d = SummaryDict(r.summary);
          d["eta_h"] = r.eta_h;
          d["eta_e"] = r.eta_e;
          d["mechanism"] = ToString(r.mechanism);
          d["alpha_mwh"] = ToMWh(r.alpha);
          out.append(d);
        }
        return out;
      },
      py::arg("eta_h"), py::arg("eta_e"), py::arg("alpha_mwh") = 100.0,
      py::arg("seeds") = 10, py::arg("master_seed") = 0, py::arg("workers") = 1,
      py::arg("params") = py::none(), py::arg("base") = py::none());

  m.def(
      "error_bound",
      [](double alpha_mwh, int seeds, std::uint64_t master_seed, int workers,
         const std::optional<PrivacyParams>& params) {
        PrivacyParams p = params.value_or(PrivacyParams{});
        p.alpha = ToWh(alpha_mwh);
        const ExperimentConfig cfg =
            Experiment(std::nullopt, seeds, master_seed, workers, p, false);
        ErrorBoundReport r;
        {
          py::gil_scoped_release release;
          r = CheckErrorBound(cfg);
        }
        py::dict d;
        d["instances"] = r.instances;
        d["failures"] = r.failures;
        d["mean_l1_mwh"] = r.mean_l1;
        d["bound"] = r.bound;
        d["ratio"] = r.ratio;
        d["pass"] = r.pass;
        return d;
      },
      py::arg("alpha_mwh"), py::arg("seeds") = 100, py::arg("master_seed") = 0,
      py::arg("workers") = 1, py::arg("params") = py::none(),
      "Mean ||D_hat - D||_1 against 4 (w alpha)^2.");

  m.def("laplace_from_uniform", &LaplaceFromUniform, py::arg("b"),
        py::arg("u"));

  m.def(
      "solve_lp",
      [](const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
         const Eigen::VectorXd& b, const Eigen::VectorXd& lo,
         const Eigen::VectorXd& hi) {
        LpProblem p;
        p.c = c;
        p.a = a;
        p.b = b;
        p.lo = lo;
        p.hi = hi;
        const LpSolution s = SolveLp(p);
        py::dict d;
        d["status"] = ToString(s.status);
        d["x"] = s.x;
        d["obj"] = s.obj;
        d["y"] = s.y;
        d["iterations"] = s.iterations;
        return d;
      },
      py::arg("c"), py::arg("a"), py::arg("b"), py::arg("lo"), py::arg("hi"),
      "min c'x subject to a x = b and lo <= x <= hi.");
}
