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

#include "dpsc/experiments.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "dpsc/common.h"
#include "dpsc/rng.h"

namespace dpsc {

namespace {

// Slack on top of the fidelity bands, as in the recovery re-clear check.
constexpr double kPriceSlack = 1e-6;  // EUR/MWh
constexpr double kCostSlack = 1e-6;   // EUR

double RelativeError(double value, double ref) {
  if (ref == 0.0) return value == 0.0 ? 0.0 : kInf;
  return std::abs(value - ref) / std::abs(ref) * 100.0;
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PrivacyMetrics Failed(std::string why) {
  PrivacyMetrics m;
  m.failed = true;
  m.failure = std::move(why);
  return m;
}

std::string Num(double x) { return fmt::format("{:.9g}", x); }

constexpr const char* kMetricHeader =
    "# delta_d: L1 distance of the released electricity loads to the true "
    "loads, MWh\n"
    "# delta_omega_l, delta_omega_f: relative error in % of the leader and "
    "follower objectives; the leader solves on the released loads, then the "
    "follower clears the TRUE loads under the resulting CHP/HP bounds\n"
    "# means and medians exclude failed instances, which are counted in "
    "failures\n";

}  // namespace

std::string ToString(Mechanism m) {
  return m == Mechanism::kLaplace ? "laplace" : "ppsm";
}

Mechanism ParseMechanism(const std::string& name) {
  if (name == "laplace") return Mechanism::kLaplace;
  if (name == "ppsm") return Mechanism::kPpsm;
  throw ValidationError("mechanism must be 'laplace' or 'ppsm', got '" + name +
                        "'");
}

ReferenceRun SolveReference(const EnergySystem& sys, const LoadData& loads,
                            const LeaderOptions& opt) {
  ReferenceRun ref;
  ref.leader = SolveLeaderBilevel(sys, loads, opt);
  ref.omega_l = ref.leader.cost;
  ref.omega_f = ref.leader.follower.cost;
  return ref;
}

PrivacyMetrics CostOfPrivacy(const EnergySystem& sys, const LoadData& loads,
                             const ReferenceRun& ref,
                             const Eigen::MatrixXd& d_released,
                             const LeaderOptions& opt) {
  if (d_released.rows() != loads.elec.rows() ||
      d_released.cols() != loads.elec.cols()) {
    throw ValidationError("cost_of_privacy: released load shape mismatch");
  }
  PrivacyMetrics m;
  m.delta_d = ToMWh((d_released - loads.elec).cwiseAbs().sum());
  try {
    const LeaderOutcome priv =
        SolveLeaderBilevel(sys, LoadData{d_released, loads.heat}, opt);
    const FollowerOutcome f =
        ClearFollower(sys, loads.elec, priv.bounds, opt.lp);
    const double omega_l = LeaderHourlyCost(sys, priv.h, f).sum();
    m.delta_omega_l = RelativeError(omega_l, ref.omega_l);
    m.delta_omega_f = RelativeError(f.cost, ref.omega_f);
  } catch (const InfeasibleError& e) {
    return Failed(e.what());
  } catch (const SolverError& e) {
    return Failed(e.what());
  }
  return m;
}

PrivacyMetrics CostOfPrivacy(const EnergySystem& sys, const LoadData& loads,
                             const Eigen::MatrixXd& d_released,
                             const LeaderOptions& opt) {
  return CostOfPrivacy(sys, loads, SolveReference(sys, loads, opt), d_released,
                       opt);
}

Summary Summarize(const std::vector<PrivacyMetrics>& metrics) {
  Summary s;
  std::vector<double> d;
  std::vector<double> l;
  std::vector<double> f;
  for (const PrivacyMetrics& m : metrics) {
    ++s.instances;
    if (m.failed) {
      ++s.failures;
      continue;
    }
    d.push_back(m.delta_d);
    l.push_back(m.delta_omega_l);
    f.push_back(m.delta_omega_f);
  }
  auto mean = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
  };
  s.mean_delta_d = mean(d);
  s.mean_delta_omega_l = mean(l);
  s.mean_delta_omega_f = mean(f);
  s.median_delta_d = Median(d);
  s.median_delta_omega_l = Median(l);
  s.median_delta_omega_f = Median(f);
  return s;
}

Case InstanceCase(const ExperimentConfig& cfg, int i) {
  if (cfg.base) return *cfg.base;
  return SynthCase(
      DeriveSeed(cfg.master_seed, 2 * static_cast<std::uint64_t>(i)),
      cfg.synth);
}

std::uint64_t InstanceNoiseSeed(const ExperimentConfig& cfg, int i) {
  return DeriveSeed(cfg.master_seed, 2 * static_cast<std::uint64_t>(i) + 1);
}

InstanceResult RunInstance(const Case& c, const PrivacyParams& p,
                           bool zero_noise) {
  const EnergySystem& sys = c.system;
  InstanceResult r;
  ReferenceRun ref;
  try {
    ref = SolveReference(sys, c.loads, p.leader);
  } catch (const InfeasibleError& e) {
    r.laplace = r.ppsm = Failed(std::string("reference: ") + e.what());
    return r;
  } catch (const SolverError& e) {
    r.laplace = r.ppsm = Failed(std::string("reference: ") + e.what());
    return r;
  }

  ObfuscationResult obf = ObfuscateStream(c.loads.elec, p);
  if (zero_noise) {
    obf.xi.setZero();
    obf.d_tilde = c.loads.elec;
  }
  r.laplace = CostOfPrivacy(sys, c.loads, ref, obf.d_tilde, p.leader);

  try {
    const PpsmTrace tr = RunPpsmFromRelease(sys, c.loads.heat, obf, p);
    r.price_residual = tr.fidelity.price_residual;
    r.cost_residual = tr.fidelity.cost_residual;
    if (r.price_residual > ToEurPerWh(kPriceSlack) ||
        r.cost_residual > kCostSlack) {
      r.ppsm = Failed(fmt::format(
          "fidelity residuals {:.3g} EUR/MWh, {:.3g} EUR above the bands",
          ToEurPerMWh(r.price_residual), r.cost_residual));
    } else {
      r.ppsm = CostOfPrivacy(sys, c.loads, ref, tr.fidelity.d_hat, p.leader);
    }
  } catch (const InfeasibleError& e) {
    r.ppsm = Failed(e.what());
  } catch (const SolverError& e) {
    r.ppsm = Failed(e.what());
  }
  return r;
}

void ParallelFor(int n, int workers, const std::function<void(int)>& f) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  const int k = std::min(workers, n);
  for (int w = 0; w < k; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

// Both mechanisms over cfg.seeds instances of `make_case`, in seed order.
std::pair<Summary, Summary> RunBatch(
    const ExperimentConfig& cfg, double alpha,
    const std::function<Case(int)>& make_case) {
  if (cfg.seeds < 1) throw ValidationError("experiments: seeds >= 1 violated");
  std::vector<InstanceResult> results(cfg.seeds);
  ParallelFor(cfg.seeds, cfg.workers, [&](int i) {
    PrivacyParams p = cfg.privacy;
    p.alpha = alpha;
    p.seed = InstanceNoiseSeed(cfg, i);
    results[i] = RunInstance(make_case(i), p, cfg.zero_noise);
  });
  std::vector<PrivacyMetrics> laplace;
  std::vector<PrivacyMetrics> ppsm;
  for (const InstanceResult& r : results) {
    laplace.push_back(r.laplace);
    ppsm.push_back(r.ppsm);
  }
  return {Summarize(laplace), Summarize(ppsm)};
}

}  // namespace

std::vector<Table1Row> RunTable1(const ExperimentConfig& cfg,
                                 const std::vector<double>& alphas) {
  if (alphas.empty()) throw ValidationError("table1: alpha list is empty");
  for (double a : alphas) {
    PrivacyParams p = cfg.privacy;
    p.alpha = a;
    p.Validate(0);
  }
  std::vector<Table1Row> rows;
  std::vector<Table1Row> ppsm;
  for (double a : alphas) {
    const auto [lap, pp] =
        RunBatch(cfg, a, [&](int i) { return InstanceCase(cfg, i); });
    rows.push_back({Mechanism::kLaplace, a, lap});
    ppsm.push_back({Mechanism::kPpsm, a, pp});
  }
  rows.insert(rows.end(), ppsm.begin(), ppsm.end());
  return rows;
}

std::vector<StressRow> RunStressSweep(const ExperimentConfig& cfg,
                                      const std::vector<double>& eta_h,
                                      const std::vector<double>& eta_e) {
  if (eta_h.empty() || eta_e.empty()) {
    throw ValidationError("stress sweep: grids must be non-empty");
  }
  for (double x : eta_h) {
    if (!(x > 0.0)) throw ValidationError("stress sweep: eta_h > 0 violated");
  }
  for (double x : eta_e) {
    if (!(x > 0.0)) throw ValidationError("stress sweep: eta_e > 0 violated");
  }
  cfg.privacy.Validate(0);
  std::vector<StressRow> rows;
  for (double h : eta_h) {
    for (double e : eta_e) {
      const auto [lap, pp] = RunBatch(cfg, cfg.privacy.alpha, [&](int i) {
        return ApplyStress(InstanceCase(cfg, i), h, e);
      });
      rows.push_back({h, e, Mechanism::kLaplace, cfg.privacy.alpha, lap});
      rows.push_back({h, e, Mechanism::kPpsm, cfg.privacy.alpha, pp});
    }
  }
  return rows;
}

double ErrorBound(int w, double alpha) {
  const double wa = w * ToMWh(alpha);
  return 4.0 * wa * wa;
}

ErrorBoundReport CheckErrorBound(const ExperimentConfig& cfg) {
  if (cfg.seeds < 30) {
    throw ValidationError("error bound check: at least 30 seeds required");
  }
  cfg.privacy.Validate(0);
  std::vector<double> l1(cfg.seeds, 0.0);
  std::vector<char> ok(cfg.seeds, 0);
  ParallelFor(cfg.seeds, cfg.workers, [&](int i) {
    const Case c = InstanceCase(cfg, i);
    PrivacyParams p = cfg.privacy;
    p.seed = InstanceNoiseSeed(cfg, i);
    PpsmHooks hooks;
    hooks.zero_noise = cfg.zero_noise;
    try {
      const PpsmTrace tr =
          RunPpsm(c.system, c.loads.heat, c.loads.elec, p, hooks);
      l1[i] = ToMWh((tr.fidelity.d_hat - c.loads.elec).cwiseAbs().sum());
      ok[i] = 1;
    } catch (const InfeasibleError&) {
    } catch (const SolverError&) {
    }
  });
  ErrorBoundReport r;
  r.instances = cfg.seeds;
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < cfg.seeds; ++i) {
    if (!ok[i]) {
      ++r.failures;
      continue;
    }
    sum += l1[i];
    ++n;
  }
  r.mean_l1 = n > 0 ? sum / n : 0.0;
  r.bound = ErrorBound(cfg.privacy.w, cfg.privacy.alpha);
  r.ratio = r.mean_l1 / r.bound;
  r.pass = n > 0 && r.mean_l1 <= r.bound;
  return r;
}

std::string Table1Csv(const std::vector<Table1Row>& rows) {
  std::string out = kMetricHeader;
  out +=
      "mechanism,alpha_mwh,instances,failures,mean_delta_d,mean_delta_omega_l,"
      "mean_delta_omega_f,median_delta_d,median_delta_omega_l,"
      "median_delta_omega_f\n";
  for (const Table1Row& r : rows) {
    const Summary& s = r.summary;
    out +=
        fmt::format("{},{},{},{},{},{},{},{},{},{}\n", ToString(r.mechanism),
                    Num(ToMWh(r.alpha)), s.instances, s.failures,
                    Num(s.mean_delta_d), Num(s.mean_delta_omega_l),
                    Num(s.mean_delta_omega_f), Num(s.median_delta_d),
                    Num(s.median_delta_omega_l), Num(s.median_delta_omega_f));
  }
  return out;
}

std::string StressCsv(const std::vector<StressRow>& rows) {
  std::string out = kMetricHeader;
  out +=
      "eta_h,eta_e,mechanism,alpha_mwh,instances,failures,mean_delta_d,"
      "mean_delta_omega_l,mean_delta_omega_f,median_delta_omega_l,"
      "median_delta_omega_f\n";
  for (const StressRow& r : rows) {
    const Summary& s = r.summary;
    out +=
        fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", Num(r.eta_h),
                    Num(r.eta_e), ToString(r.mechanism), Num(ToMWh(r.alpha)),
                    s.instances, s.failures, Num(s.mean_delta_d),
                    Num(s.mean_delta_omega_l), Num(s.mean_delta_omega_f),
                    Num(s.median_delta_omega_l), Num(s.median_delta_omega_f));
  }
  return out;
}

std::string ErrorBoundCsv(const ErrorBoundReport& r, const PrivacyParams& p) {
  std::string out =
      "# mean_l1: mean L1 distance of the recovered loads to the true loads, "
      "MWh; bound: 4 (w alpha)^2 with alpha in MWh\n";
  out += "epsilon,alpha_mwh,w,instances,failures,mean_l1,bound,ratio,pass\n";
  out += fmt::format("{},{},{},{},{},{},{},{},{}\n", Num(p.epsilon),
                     Num(ToMWh(p.alpha)), p.w, r.instances, r.failures,
                     Num(r.mean_l1), Num(r.bound), Num(r.ratio),
                     r.pass ? "true" : "false");
  return out;
}

}  // namespace dpsc
