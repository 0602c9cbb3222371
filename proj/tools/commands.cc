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

#include "commands.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <utility>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "dpsc/case_io.h"
#include "dpsc/common.h"
#include "dpsc/experiments.h"
#include "dpsc/markets.h"
#include "dpsc/outcome_io.h"
#include "dpsc/privacy.h"
#include "dpsc/sysmodel.h"
#include "dpsc/validation.h"

#ifndef DPSC_VERSION
#define DPSC_VERSION "unknown"
#endif

namespace dpsc::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const std::set<std::string> kCommands = {"clear", "ppsm",     "table1", "sweep",
                                         "bound", "validate", "synth"};

std::uint64_t Fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Json ConfigJson(const CliConfig& c) {
  return Json{{"command", c.command},
              {"case", c.case_path},
              {"seed", c.seed},
              {"alpha_mwh", c.alpha_mwh},
              {"epsilon", c.epsilon},
              {"eta_p", c.eta_p},
              {"eta_d", c.eta_d},
              {"w", c.w},
              {"k_bits", c.k_bits},
              {"workers", c.workers},
              {"mechanism", c.mechanism},
              {"zero_noise", c.zero_noise},
              {"seeds", c.seeds},
              {"eta_h", c.eta_h},
              {"eta_e", c.eta_e},
              {"leader", c.leader},
              {"budget_split", c.budget_split},
              {"fuse_forecast", c.fuse_forecast},
              {"inject_fault", c.inject_fault}};
}

CliConfig ConfigFromJson(const Json& j) {
  CliConfig c;
  try {
    c.command = j.at("command").get<std::string>();
    c.case_path = j.at("case").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.alpha_mwh = j.at("alpha_mwh").get<std::vector<double>>();
    c.epsilon = j.at("epsilon").get<double>();
    c.eta_p = j.at("eta_p").get<double>();
    c.eta_d = j.at("eta_d").get<double>();
    c.w = j.at("w").get<int>();
    c.k_bits = j.at("k_bits").get<int>();
    c.workers = j.at("workers").get<int>();
    c.mechanism = j.at("mechanism").get<std::string>();
    c.zero_noise = j.at("zero_noise").get<bool>();
    c.seeds = j.at("seeds").get<int>();
    c.eta_h = j.at("eta_h").get<std::vector<double>>();
    c.eta_e = j.at("eta_e").get<std::vector<double>>();
    c.leader = j.at("leader").get<std::string>();
    c.budget_split = j.at("budget_split").get<std::string>();
    c.fuse_forecast = j.at("fuse_forecast").get<bool>();
    c.inject_fault = j.at("inject_fault").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest config: ") + e.what());
  }
  return c;
}

void Require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

bool UsesPrivacy(const std::string& cmd) {
  return cmd == "ppsm" || cmd == "table1" || cmd == "sweep" || cmd == "bound";
}

LeaderOptions LeaderFor(const CliConfig& cfg) {
  LeaderOptions o;
  o.method = cfg.leader == "milp" ? LeaderMethod::kBinaryExpansion
                                  : LeaderMethod::kPriceEnumeration;
  o.k_bits = cfg.k_bits;
  return o;
}

PrivacyParams ParamsFor(const CliConfig& cfg, double alpha_mwh) {
  PrivacyParams p;
  p.epsilon = cfg.epsilon;
  p.alpha = ToWh(alpha_mwh);
  p.w = cfg.w;
  p.eta_p = cfg.eta_p;
  p.eta_d = cfg.eta_d;
  p.seed = cfg.seed;
  p.budget_split = cfg.budget_split == "coupled"
                       ? BudgetSplit::kCoupled
                       : BudgetSplit::kPerHourProportional;
  p.fuse_forecast = cfg.fuse_forecast;
  p.leader = LeaderFor(cfg);
  return p;
}

std::vector<double> AlphasWh(const CliConfig& cfg) {
  std::vector<double> out;
  for (double a : cfg.alpha_mwh) out.push_back(ToWh(a));
  return out;
}

// Collects output files and their digests for the manifest.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void Write(const std::string& name, const std::string& contents) {
    WriteFile((dir_ / name).string(), contents);
    files_.push_back(
        Json{{"file", name},
             {"bytes", contents.size()},
             {"fnv1a64", fmt::format("{:016x}", Fnv1a(contents))}});
    spdlog::debug("wrote {}", (dir_ / name).string());
  }

  Json Files() const { return files_; }

 private:
  fs::path dir_;
  Json files_ = Json::array();
};

void CheckWritable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  Require(!ec && fs::is_directory(dir),
          fmt::format("output directory '{}' cannot be created", dir.string()));
  const fs::path probe = dir / ".dpsc_write_probe";
  WriteFile(probe.string(), "");
  fs::remove(probe, ec);
}

struct Input {
  Case c;
  Json provenance;
};

Input LoadInput(const CliConfig& cfg) {
  Input in;
  if (cfg.case_path == "synth") {
    in.c = SynthCase(cfg.seed);
    in.provenance = Json{{"source", "synth"}, {"seed", cfg.seed}};
  } else {
    Require(fs::is_regular_file(cfg.case_path),
            fmt::format("case file '{}' not found", cfg.case_path));
    const std::string text = ReadFile(cfg.case_path);
    in.c = ParseCase(text);
    in.provenance = Json{{"source", cfg.case_path},
                         {"fnv1a64", fmt::format("{:016x}", Fnv1a(text))}};
  }
  if (!cfg.eta_h.empty() || !cfg.eta_e.empty()) {
    const double eh = cfg.eta_h.empty() ? 1.0 : cfg.eta_h[0];
    const double ee = cfg.eta_e.empty() ? 1.0 : cfg.eta_e[0];
    if (cfg.command == "clear" || cfg.command == "ppsm") {
      in.c = ApplyStress(in.c, eh, ee);
    }
  }
  return in;
}

Json Tolerances() {
  const LpTolerances lp;
  const LeaderOptions lo;
  const PrivacyParams p;
  return Json{{"lp_feasibility", lp.feas},
              {"lp_complementarity", lp.cs},
              {"lp_relative_gap", lp.dual},
              {"mip_gap", lo.mip_gap},
              {"fidelity_price_slack_eur_per_mwh", 1e-6},
              {"fidelity_cost_slack_eur", 1e-6},
              {"interior_margin", p.interior_margin}};
}

Json Metrics(const PrivacyMetrics& m) {
  return Json{{"failed", m.failed},
              {"failure", m.failure},
              {"delta_d_mwh", m.delta_d},
              {"delta_omega_l_pct", m.delta_omega_l},
              {"delta_omega_f_pct", m.delta_omega_f}};
}

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

int RunClear(const CliConfig& cfg, const Input& in, Outputs& out) {
  const EnergySystem& sys = in.c.system;
  spdlog::info("clearing {} hours, {} units", sys.horizon, sys.units.size());
  const LeaderOutcome l = SolveLeaderBilevel(sys, in.c.loads, LeaderFor(cfg));
  out.Write("leader.json", LeaderReportJson(sys, l));
  out.Write("follower.json", FollowerReportJson(sys, l.follower));
  out.Write("prices.csv",
            MatrixToCsv(l.follower.lambda, sys.elec_zones, 1.0 / kWhPerMWh));
  out.Write("heat.csv", MatrixToCsv(l.h, UnitNames(sys), kWhPerMWh, "unit"));
  out.Write("dispatch.csv",
            MatrixToCsv(l.follower.e, UnitNames(sys), kWhPerMWh, "unit"));
  spdlog::info("leader cost {:.2f} EUR, follower cost {:.2f} EUR", l.cost,
               l.follower.cost);
  return kExitOk;
}

int RunPpsmCommand(const CliConfig& cfg, const Input& in, Outputs& out) {
  const EnergySystem& sys = in.c.system;
  const LoadData& loads = in.c.loads;
  const PrivacyParams p = ParamsFor(cfg, cfg.alpha_mwh[0]);
  const ReferenceRun ref = SolveReference(sys, loads, p.leader);
  Json metrics{{"reference", Json{{"omega_l_eur", ref.omega_l},
                                  {"omega_f_eur", ref.omega_f}}},
               {"scale_mwh", ToMWh(p.scale())}};
  if (cfg.mechanism == "laplace") {
    ObfuscationResult ob;
    if (cfg.zero_noise) {
      ob.d_tilde = loads.elec;
      ob.xi = Eigen::MatrixXd::Zero(loads.elec.rows(), loads.elec.cols());
      ob.scale = p.scale();
    } else {
      ob = ObfuscateStream(loads.elec, p);
    }
    metrics["laplace"] =
        Metrics(CostOfPrivacy(sys, loads, ref, ob.d_tilde, p.leader));
    out.Write("d_tilde.csv", MatrixToCsv(ob.d_tilde, sys.elec_zones));
    out.Write("metrics.json", Dump(metrics));
    return kExitOk;
  }
  PpsmHooks hooks;
  hooks.zero_noise = cfg.zero_noise;
  const PpsmTrace tr = RunPpsm(sys, loads.heat, loads.elec, p, hooks);
  metrics["laplace"] =
      Metrics(CostOfPrivacy(sys, loads, ref, tr.obfuscation.d_tilde, p.leader));
  metrics["ppsm"] =
      Metrics(CostOfPrivacy(sys, loads, ref, tr.fidelity.d_hat, p.leader));
  out.Write("ppsm_report.json", PpsmReportJson(sys, tr, p));
  out.Write("d_tilde.csv", MatrixToCsv(tr.obfuscation.d_tilde, sys.elec_zones));
  out.Write("d_hat.csv", MatrixToCsv(tr.fidelity.d_hat, sys.elec_zones));
  out.Write("metrics.json", Dump(metrics));
  spdlog::info("ppsm: distance {:.3f} MWh^2, {} price vectors",
               tr.fidelity.distance, tr.fidelity.price_vectors);
  return kExitOk;
}

ExperimentConfig ExperimentFor(const CliConfig& cfg, const Input* in) {
  ExperimentConfig ec;
  if (in) ec.base = in->c;
  ec.master_seed = cfg.seed;
  ec.seeds = cfg.seeds;
  ec.privacy = ParamsFor(cfg, cfg.alpha_mwh[0]);
  ec.workers = cfg.workers;
  ec.zero_noise = cfg.zero_noise;
  return ec;
}

template <typename Row>
std::vector<Row> Only(std::vector<Row> rows, const std::string& mechanism) {
  if (mechanism.empty()) return rows;
  const Mechanism m = ParseMechanism(mechanism);
  rows.erase(std::remove_if(rows.begin(), rows.end(),
                            [m](const Row& r) { return r.mechanism != m; }),
             rows.end());
  return rows;
}

int RunTable1Command(const CliConfig& cfg, const Input* in, Outputs& out) {
  const ExperimentConfig ec = ExperimentFor(cfg, in);
  const auto rows = Only(RunTable1(ec, AlphasWh(cfg)), cfg.mechanism);
  out.Write("table1.csv", Table1Csv(rows));
  return kExitOk;
}

int RunSweepCommand(const CliConfig& cfg, const Input* in, Outputs& out) {
  const ExperimentConfig ec = ExperimentFor(cfg, in);
  const auto rows =
      Only(RunStressSweep(ec, cfg.eta_h, cfg.eta_e), cfg.mechanism);
  out.Write("sweep.csv", StressCsv(rows));
  return kExitOk;
}

int RunBoundCommand(const CliConfig& cfg, const Input* in, Outputs& out) {
  std::string csv;
  bool pass = true;
  for (double a : cfg.alpha_mwh) {
    ExperimentConfig ec = ExperimentFor(cfg, in);
    ec.privacy.alpha = ToWh(a);
    const ErrorBoundReport r = CheckErrorBound(ec);
    std::string part = ErrorBoundCsv(r, ec.privacy);
    if (!csv.empty()) {
      // Keep the comment and header lines once.
      for (int k = 0; k < 2; ++k) part.erase(0, part.find('\n') + 1);
    }
    csv += part;
    spdlog::info("alpha {} MWh: mean L1 {:.3f} MWh, bound {:.1f}, ratio {:.3g}",
                 a, r.mean_l1, r.bound, r.ratio);
    pass = pass && r.pass;
  }
  out.Write("bound.csv", csv);
  return pass ? kExitOk : kExitFailure;
}

int RunValidateCommand(const CliConfig& cfg, Outputs& out) {
  ValidationOptions vo;
  vo.seed = cfg.seed;
  vo.k_bits = cfg.k_bits;
  vo.fault = cfg.inject_fault;
  const std::vector<ValidationCheck> checks = RunValidation(vo);
  out.Write("validate.csv", ValidationCsv(checks));
  int failed = 0;
  for (const ValidationCheck& c : checks) {
    if (!c.passed) {
      ++failed;
      spdlog::warn("{} #{} failed: error {:.3g} > {:.3g} ({})", c.suite,
                   c.instance, c.error, c.tolerance, c.detail);
    }
  }
  spdlog::info("{} of {} checks passed", checks.size() - failed, checks.size());
  return failed == 0 ? kExitOk : kExitFailure;
}

void SetupLogging() {
  auto logger = spdlog::stderr_logger_mt("dpsc");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("DPSC_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace

CliConfig Resolve(CliConfig cfg) {
  Require(kCommands.count(cfg.command) == 1,
          fmt::format("unknown command '{}'", cfg.command));
  const std::string& cmd = cfg.command;
  if (cfg.alpha_mwh.empty()) {
    if (cmd == "table1") {
      cfg.alpha_mwh = {10.0, 50.0, 100.0};
    } else if (cmd == "sweep") {
      cfg.alpha_mwh = {100.0};
    } else if (cmd == "bound") {
      cfg.alpha_mwh = {10.0, 50.0};
    } else if (cmd == "ppsm") {
      cfg.alpha_mwh = {10.0};
    }
  }
  if (cfg.seeds == 0) {
    if (cmd == "table1") cfg.seeds = 20;
    if (cmd == "sweep") cfg.seeds = 10;
    if (cmd == "bound") cfg.seeds = 100;
  }
  if (cmd == "sweep") {
    if (cfg.eta_h.empty()) cfg.eta_h = {1.3, 1.45, 1.6};
    if (cfg.eta_e.empty()) cfg.eta_e = {1.1, 1.4, 1.7, 2.0};
  }
  if (cmd == "ppsm" && cfg.mechanism.empty()) cfg.mechanism = "ppsm";

  Require(cfg.workers >= 1, "--workers must be at least 1");
  Require(cfg.k_bits >= 1 && cfg.k_bits <= 20, "--k-bits must be in [1, 20]");
  Require(cfg.leader == "enumeration" || cfg.leader == "milp",
          "--leader must be 'enumeration' or 'milp'");
  Require(cfg.budget_split == "per_hour" || cfg.budget_split == "coupled",
          "--budget-split must be 'per_hour' or 'coupled'");
  Require(cfg.mechanism.empty() || cfg.mechanism == "laplace" ||
              cfg.mechanism == "ppsm",
          "--mechanism must be 'laplace' or 'ppsm'");
  Require(!cfg.case_path.empty(), "--case must not be empty");
  for (double e : cfg.eta_h)
    Require(e > 0.0, "--eta-h values must be positive");
  for (double e : cfg.eta_e)
    Require(e > 0.0, "--eta-e values must be positive");
  if (cmd == "clear" || cmd == "ppsm") {
    Require(cfg.eta_h.size() <= 1 && cfg.eta_e.size() <= 1,
            "--eta-h and --eta-e take one value for " + cmd);
  } else if (cmd != "sweep") {
    Require(cfg.eta_h.empty() && cfg.eta_e.empty(),
            "--eta-h and --eta-e apply to clear, ppsm and sweep");
  }
  if (UsesPrivacy(cmd)) {
    Require(!cfg.alpha_mwh.empty(), "--alpha needs at least one value");
    if (cmd == "ppsm" || cmd == "sweep") {
      Require(cfg.alpha_mwh.size() == 1, "--alpha takes one value for " + cmd);
    }
    for (double a : cfg.alpha_mwh) {
      ParamsFor(cfg, a).Validate(0);
    }
  }
  if (cmd == "table1" || cmd == "sweep" || cmd == "bound") {
    Require(cfg.seeds >= 1, "--seeds must be at least 1");
  }
  if (cmd == "bound") Require(cfg.seeds >= 30, "bound needs --seeds >= 30");
  return cfg;
}

int Run(const CliConfig& cfg_in) {
  const CliConfig cfg = Resolve(cfg_in);
  const fs::path dir(cfg.out_dir);
  CheckWritable(dir);

  Json manifest{{"tool", "dpsc"},
                {"version", DPSC_VERSION},
                {"command", cfg.command},
                {"config", ConfigJson(cfg)}};
  Outputs out(dir);
  int code = kExitOk;
  if (cfg.command == "validate") {
    manifest["case"] = Json{{"source", "fixtures"}, {"seed", cfg.seed}};
    code = RunValidateCommand(cfg, out);
  } else {
    const Input in = LoadInput(cfg);
    manifest["case"] = in.provenance;
    if (UsesPrivacy(cfg.command)) {
      Json params = Json::array();
      for (double a : cfg.alpha_mwh) {
        PrivacyParams p = ParamsFor(cfg, a);
        p.Validate(in.c.system.horizon);
        params.push_back(Json::parse(PrivacyParamsJson(p)));
      }
      manifest["params"] = params;
    }
    const Input* base = cfg.case_path == "synth" ? nullptr : &in;
    if (cfg.command == "synth") {
      out.Write("case.json", SerializeCase(in.c));
    } else if (cfg.command == "clear") {
      code = RunClear(cfg, in, out);
    } else if (cfg.command == "ppsm") {
      code = RunPpsmCommand(cfg, in, out);
    } else if (cfg.command == "table1") {
      code = RunTable1Command(cfg, base, out);
    } else if (cfg.command == "sweep") {
      code = RunSweepCommand(cfg, base, out);
    } else if (cfg.command == "bound") {
      code = RunBoundCommand(cfg, base, out);
    }
  }
  manifest["tolerances"] = Tolerances();
  manifest["outputs"] = out.Files();
  manifest["exit_code"] = code;
  WriteFile((dir / "manifest.json").string(), Dump(manifest));
  return code;
}

int Main(int argc, char** argv) {
  SetupLogging();
  CLI::App app{"Privacy-preserving heat and electricity market coordination"};
  app.require_subcommand(1);
  CliConfig cfg;
  std::string manifest_path;

  app.add_option("--case", cfg.case_path,
                 "Case JSON file, or 'synth' for the synthetic case at --seed")
      ->capture_default_str();
  app.add_option("--out", cfg.out_dir, "Output directory")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Master seed for every random draw")
      ->capture_default_str();
  app.add_option("--alpha", cfg.alpha_mwh, "Adjacency bound alpha, MWh")
      ->delimiter(',');
  app.add_option("--epsilon", cfg.epsilon, "Privacy budget")
      ->capture_default_str();
  app.add_option("--eta-p", cfg.eta_p, "Relative follower cost tolerance")
      ->capture_default_str();
  app.add_option("--eta-d", cfg.eta_d, "Relative price tolerance")
      ->capture_default_str();
  app.add_option("--w", cfg.w, "Event window, hours")->capture_default_str();
  app.add_option("--k-bits", cfg.k_bits, "Heat grid bits of the leader MILP")
      ->capture_default_str();
  app.add_option("--workers", cfg.workers, "Parallel instances")
      ->capture_default_str();
  app.add_option("--mechanism", cfg.mechanism, "laplace or ppsm");
  app.add_flag("--zero-noise", cfg.zero_noise, "Release the true loads");
  app.add_option("--seeds", cfg.seeds, "Instances per experiment cell");
  app.add_option("--eta-h", cfg.eta_h, "Heat load scaling")->delimiter(',');
  app.add_option("--eta-e", cfg.eta_e, "Electricity load scaling")
      ->delimiter(',');
  app.add_option("--leader", cfg.leader, "enumeration or milp")
      ->capture_default_str();
  app.add_option("--budget-split", cfg.budget_split, "per_hour or coupled")
      ->capture_default_str();
  app.add_option("--fuse-forecast", cfg.fuse_forecast,
                 "Blend the release with the public forecast")
      ->capture_default_str();
  app.add_option("--inject-fault", cfg.inject_fault)->group("");

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"clear", "Clear the leader heat and follower electricity markets"},
      {"ppsm", "Obfuscate the loads and recover fidelity"},
      {"table1", "Cost of privacy for Laplace and PPSM across alpha"},
      {"sweep", "Cost of privacy across heat and electricity load scaling"},
      {"bound", "Mean recovery error against 4 (w alpha)^2"},
      {"validate", "Compare the solvers with brute-force oracles"},
      {"synth", "Write the synthetic case as JSON"},
  };
  for (const auto& [name, help] : subs) {
    app.add_subcommand(name, help)->fallthrough();
  }
  CLI::App* replay =
      app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->fallthrough();
  replay->add_option("--manifest", manifest_path, "manifest.json to replay")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (replay->parsed()) {
      const std::string out_dir = cfg.out_dir;
      try {
        cfg = ConfigFromJson(Json::parse(ReadFile(manifest_path)).at("config"));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
      }
      cfg.out_dir = out_dir;
    } else {
      cfg.command = app.get_subcommands().front()->get_name();
    }
    return Run(cfg);
  } catch (const InfeasibleError& e) {
    spdlog::error("infeasible: {}", e.what());
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    spdlog::error("invalid input: {}", e.what());
    return kExitInvalid;
  } catch (const ParseError& e) {
    spdlog::error("parse error: {}", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
}

}  // namespace dpsc::cli
