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

#include "dpsc/privacy.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include <fmt/format.h>

#include "dpsc/branchbound.h"
#include "dpsc/lp.h"
#include "follower_model.h"

namespace dpsc {

namespace {

constexpr std::uint64_t kLaplaceStream = 0x1a91ace;

// Slack of the re-clear check on top of the bands.
constexpr double kPriceSlack = 1e-6;  // EUR/MWh
constexpr double kCostSlack = 1e-6;   // EUR

using internal::FollowerHour;
using internal::Link;
using internal::Offer;

}  // namespace

std::string ToString(BudgetSplit split) {
  switch (split) {
    case BudgetSplit::kPerHourProportional:
      return "per_hour_proportional";
    case BudgetSplit::kCoupled:
      return "coupled";
  }
  return "unknown";
}

void PrivacyParams::Validate(int horizon) const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("privacy: epsilon > 0 violated");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ValidationError("privacy: alpha > 0 violated");
  }
  if (w < 1) throw ValidationError("privacy: w >= 1 violated");
  if (horizon > 0 && w > horizon) {
    throw ValidationError(
        fmt::format("privacy: w <= horizon violated ({} > {})", w, horizon));
  }
  if (!(eta_p >= 0.0)) throw ValidationError("privacy: eta_p >= 0 violated");
  if (!(eta_d >= 0.0)) throw ValidationError("privacy: eta_d >= 0 violated");
  if (!(lambda_floor > 0.0) || !std::isfinite(lambda_floor)) {
    throw ValidationError("privacy: lambda_floor > 0 violated");
  }
  if (max_price_vectors < 1) {
    throw ValidationError("privacy: max_price_vectors >= 1 violated");
  }
  if (!(interior_margin > 0.0) || interior_margin >= 1e-2) {
    throw ValidationError("privacy: 0 < interior_margin < 1e-2 violated");
  }
}

double LaplaceFromUniform(double b, double u) {
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw ValidationError("laplace_sample: b > 0 violated");
  }
  if (!(u > 0.0 && u < 1.0)) {
    throw ValidationError("laplace_sample: u in (0, 1) violated");
  }
  const double c = u - 0.5;
  if (c == 0.0) return 0.0;
  return -b * std::copysign(1.0, c) * std::log1p(-2.0 * std::abs(c));
}

double LaplaceSample(double b, CounterRng& rng) {
  return LaplaceFromUniform(b, rng.Uniform());
}

ObfuscationResult ObfuscateStream(const Eigen::MatrixXd& d,
                                  const PrivacyParams& p) {
  p.Validate(0);
  if (!d.allFinite()) {
    throw ValidationError("obfuscate_stream: loads must be finite");
  }
  ObfuscationResult out;
  out.scale = p.scale();
  out.xi.resize(d.rows(), d.cols());
  const std::uint64_t nz = static_cast<std::uint64_t>(d.rows());
  for (int t = 0; t < d.cols(); ++t) {
    for (int z = 0; z < d.rows(); ++z) {
      const std::uint64_t cell = static_cast<std::uint64_t>(t) * nz + z;
      out.xi(z, t) = LaplaceFromUniform(
          out.scale, UniformAt(p.seed, kLaplaceStream, cell));
    }
  }
  out.d_tilde = d + out.xi;
  return out;
}

bool AdjacentW(const Eigen::MatrixXd& d, const Eigen::MatrixXd& d2,
               double alpha, int w) {
  if (d.rows() != d2.rows() || d.cols() != d2.cols()) {
    throw ValidationError("adjacent_w: shape mismatch");
  }
  if (!(alpha >= 0.0) || w < 1) {
    throw ValidationError("adjacent_w: alpha >= 0 and w >= 1 required");
  }
  int first = -1;
  int last = -1;
  for (int t = 0; t < d.cols(); ++t) {
    int changed = 0;
    for (int z = 0; z < d.rows(); ++z) {
      if (d(z, t) == d2(z, t)) continue;
      ++changed;
      if (!(std::abs(d(z, t) - d2(z, t)) <= alpha)) return false;
    }
    if (changed == 0) continue;
    if (changed > 1) return false;
    if (first < 0) first = t;
    last = t;
  }
  return first < 0 || last - first + 1 <= w;
}

Eigen::MatrixXd PredictionLoads(const EnergySystem& sys,
                                const Eigen::MatrixXd& d_tilde, double scale,
                                const PrivacyParams& p) {
  if (!p.fuse_forecast || !sys.forecast || !(scale > 0.0)) return d_tilde;
  const Eigen::MatrixXd& f = sys.forecast->elec;
  if (f.rows() != d_tilde.rows() || f.cols() != d_tilde.cols()) {
    throw ValidationError("prediction loads: forecast shape mismatch");
  }
  const double noise_var = 2.0 * scale * scale;
  Eigen::MatrixXd out(d_tilde.rows(), d_tilde.cols());
  for (int t = 0; t < d_tilde.cols(); ++t) {
    for (int z = 0; z < d_tilde.rows(); ++z) {
      const double sd = sys.forecast->rel_std * f(z, t);
      const double var = sd * sd;
      out(z, t) =
          (noise_var * f(z, t) + var * d_tilde(z, t)) / (noise_var + var);
    }
  }
  return out;
}

FidelityBands FidelityBandsFor(const FidelityTargets& targets,
                               const PrivacyParams& p) {
  const Eigen::VectorXd& omega = targets.omega_bar;
  const int horizon = static_cast<int>(omega.size());
  FidelityBands bands;
  bands.eta_p.resize(horizon);
  const double total = omega.sum();
  const double weight = omega.cwiseAbs().sum();
  for (int t = 0; t < horizon; ++t) {
    if (std::isinf(p.eta_p)) {
      bands.eta_p[t] = kInf;
    } else if (weight > 0.0) {
      bands.eta_p[t] = p.eta_p * std::abs(total) * std::abs(omega[t]) / weight;
    } else {
      bands.eta_p[t] = 0.0;
    }
  }
  bands.eta_d.resize(targets.lambda_bar.rows(), targets.lambda_bar.cols());
  for (int t = 0; t < targets.lambda_bar.cols(); ++t) {
    for (int z = 0; z < targets.lambda_bar.rows(); ++z) {
      bands.eta_d(z, t) =
          std::isinf(p.eta_d)
              ? kInf
              : p.eta_d * std::max(std::abs(targets.lambda_bar(z, t)),
                                   p.lambda_floor);
    }
  }
  return bands;
}

FidelityError::FidelityError(int hour, double price_violation,
                             double cost_violation)
    : InfeasibleError(fmt::format(
          "fidelity recovery: hour {}: no nonnegative load meets the bands; "
          "smallest violation {:.6g} EUR/MWh on price, {:.6g} EUR on cost",
          hour, ToEurPerMWh(price_violation), cost_violation)),
      hour_(hour),
      price_violation_(price_violation),
      cost_violation_(cost_violation) {}

namespace {

// Recovery problem over a set of hours, in MWh and EUR/MWh. Per hour:
// loads d_hat >= 0, follower dispatch, and the follower cost w_t. With a
// daily row, sum_t w_t is tied to one bounded variable.
class RecoveryModel {
 public:
  struct Block {
    int hour;
    FollowerHour fh;
    std::vector<int> d_hat;
    std::vector<int> offer;
    std::vector<int> link;
    std::vector<int> shed;
    std::vector<int> spill;
    int cost;
  };

  RecoveryModel(const EnergySystem& sys, const std::vector<int>& hours,
                const CouplingBounds& bounds, const Eigen::MatrixXd& d_tilde,
                const Eigen::VectorXd& cost_lo, const Eigen::VectorXd& cost_hi,
                std::optional<std::pair<double, double>> daily) {
    using Sense = LpBuilder::Sense;
    LpBuilder b;
    std::vector<double> center;
    std::vector<int> quad_vars;
    LpBuilder::Terms daily_row;
    for (int t : hours) {
      Block blk;
      blk.hour = t;
      blk.fh = internal::MakeFollowerHour(sys, t, bounds);
      const FollowerHour& fh = blk.fh;
      std::vector<LpBuilder::Terms> balance(fh.num_zones);
      LpBuilder::Terms cost_row;
      for (int z = 0; z < fh.num_zones; ++z) {
        const int v = b.AddVar(0.0, kInf);
        blk.d_hat.push_back(v);
        quad_vars.push_back(v);
        center.push_back(ToMWh(d_tilde(z, t)));
        balance[z].emplace_back(v, -1.0);
      }
      for (const Offer& o : fh.offers) {
        scale_ = std::max({scale_, std::abs(o.lo), std::abs(o.hi)});
        const int v = b.AddVar(std::min(o.lo, o.hi), o.hi);
        blk.offer.push_back(v);
        balance[o.zone].emplace_back(v, 1.0);
        if (o.cost != 0.0) cost_row.emplace_back(v, o.cost);
      }
      for (const Link& l : fh.links) {
        scale_ = std::max({scale_, std::abs(l.lo), std::abs(l.hi)});
        const int v = b.AddVar(l.lo, l.hi);
        blk.link.push_back(v);
        balance[l.to].emplace_back(v, 1.0);
        balance[l.from].emplace_back(v, -1.0);
      }
      if (fh.limits) {
        for (int z = 0; z < fh.num_zones; ++z) {
          const int s = b.AddVar(0.0, kInf);
          const int d = b.AddVar(-kInf, 0.0);
          blk.shed.push_back(s);
          blk.spill.push_back(d);
          balance[z].emplace_back(s, 1.0);
          balance[z].emplace_back(d, 1.0);
          cost_row.emplace_back(s, fh.cap);
          cost_row.emplace_back(d, fh.floor);
        }
      }
      blk.cost = b.AddVar(cost_lo[t], cost_hi[t]);
      cost_row.emplace_back(blk.cost, -1.0);
      for (int z = 0; z < fh.num_zones; ++z)
        b.AddRow(balance[z], Sense::kEq, 0.0);
      b.AddRow(cost_row, Sense::kEq, 0.0);
      daily_row.emplace_back(blk.cost, 1.0);
      blocks_.push_back(std::move(blk));
    }
    if (daily) {
      const int v = b.AddVar(daily->first, daily->second);
      daily_row.emplace_back(v, -1.0);
      b.AddRow(daily_row, Sense::kEq, 0.0);
    }
    lp_ = b.Build();
    quad_.q = Eigen::VectorXd::Zero(lp_.num_vars());
    quad_.center = Eigen::VectorXd::Zero(lp_.num_vars());
    for (size_t k = 0; k < quad_vars.size(); ++k) {
      quad_.q[quad_vars[k]] = 1.0;
      quad_.center[quad_vars[k]] = center[k];
    }
  }

  const LpProblem& lp() const { return lp_; }
  const QuadraticTerm& quad() const { return quad_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  double scale() const { return scale_; }

  // Bounds for follower optimality at prices lam[block][zone], as in the
  // leader enumeration. delta > 0 keeps price-setting variables interior.
  bool Fix(const std::vector<std::vector<double>>& lam, double delta,
           Eigen::VectorXd* lo, Eigen::VectorXd* hi) const {
    *lo = lp_.lo;
    *hi = lp_.hi;
    auto pin = [&](int v, double cost, double price) {
      if (cost < price) (*lo)[v] = (*hi)[v];
      if (cost > price) (*hi)[v] = (*lo)[v];
      if (cost == price && (*lo)[v] < (*hi)[v]) {
        (*lo)[v] += delta;
        (*hi)[v] -= delta;
      }
    };
    for (size_t k = 0; k < blocks_.size(); ++k) {
      const Block& blk = blocks_[k];
      const std::vector<double>& l = lam[k];
      for (size_t i = 0; i < blk.offer.size(); ++i) {
        const Offer& o = blk.fh.offers[i];
        pin(blk.offer[i], o.cost, l[o.zone]);
      }
      for (size_t i = 0; i < blk.link.size(); ++i) {
        const Link& ln = blk.fh.links[i];
        pin(blk.link[i], l[ln.from], l[ln.to]);
      }
      for (size_t z = 0; z < blk.shed.size(); ++z) {
        if (l[z] == blk.fh.cap) {
          (*lo)[blk.shed[z]] = delta;
        } else {
          (*hi)[blk.shed[z]] = 0.0;
        }
        if (l[z] == blk.fh.floor) {
          (*hi)[blk.spill[z]] = -delta;
        } else {
          (*lo)[blk.spill[z]] = 0.0;
        }
      }
    }
    for (int v = 0; v < lo->size(); ++v) {
      if ((*lo)[v] > (*hi)[v]) return false;
    }
    return true;
  }

  // Loads of block k in MWh, clipped at zero.
  Eigen::VectorXd Loads(const Eigen::VectorXd& x, size_t k) const {
    const Block& blk = blocks_[k];
    Eigen::VectorXd d(blk.d_hat.size());
    for (size_t z = 0; z < blk.d_hat.size(); ++z) {
      d[z] = std::max(0.0, x[blk.d_hat[z]]);
    }
    return d;
  }

 private:
  LpProblem lp_;
  QuadraticTerm quad_;
  std::vector<Block> blocks_;
  double scale_ = 1.0;
};

// Candidate zone prices of one hour: offer costs, cap and floor.
std::vector<double> PriceSet(const FollowerHour& fh) {
  std::vector<double> s;
  for (const Offer& o : fh.offers) s.push_back(o.cost);
  if (fh.limits) {
    s.push_back(fh.cap);
    s.push_back(fh.floor);
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

// Walks the cartesian product of `choices`, calling f(vector). Returns false
// when the product exceeds `limit`.
template <typename F>
bool ForEachVector(const std::vector<std::vector<double>>& choices,
                   std::int64_t limit, F&& f) {
  std::int64_t n = 1;
  for (const auto& c : choices) {
    if (c.empty()) return true;
    n *= static_cast<std::int64_t>(c.size());
    if (n > limit) return false;
  }
  std::vector<size_t> pick(choices.size(), 0);
  std::vector<double> v(choices.size());
  while (true) {
    for (size_t z = 0; z < choices.size(); ++z) v[z] = choices[z][pick[z]];
    f(v);
    size_t z = 0;
    while (z < choices.size() && ++pick[z] == choices[z].size()) pick[z++] = 0;
    if (z == choices.size()) return true;
  }
}

struct Checked {
  bool prices_ok = false;
  bool cost_ok = false;
  Eigen::VectorXd lambda;  // EUR/MWh
  double cost = 0.0;       // EUR
};

class Recovery {
 public:
  Recovery(const EnergySystem& sys, const Eigen::MatrixXd& d_tilde,
           const FidelityTargets& targets, const FidelityBands& bands,
           const PrivacyParams& p)
      : sys_(sys), d_tilde_(d_tilde), targets_(targets), bands_(bands), p_(p) {}

  struct HourChoice {
    std::vector<double> lam;  // EUR/MWh
    double delta = 0.0;
    Eigen::VectorXd d_hat;  // MWh
  };

  // Closest loads for hour t. With `cost_band` false the hourly cost is
  // left free and only prices are checked.
  std::optional<HourChoice> SolveHour(int t, bool cost_band,
                                      FidelityResult* stats) const {
    Eigen::VectorXd lo(sys_.horizon);
    Eigen::VectorXd hi(sys_.horizon);
    lo.setConstant(-kInf);
    hi.setConstant(kInf);
    if (cost_band) {
      lo[t] = targets_.omega_bar[t] - bands_.eta_p[t];
      hi[t] = targets_.omega_bar[t] + bands_.eta_p[t];
    }
    RecoveryModel model(sys_, {t}, targets_.bounds, d_tilde_, lo, hi,
                        std::nullopt);
    const FollowerHour& fh = model.blocks()[0].fh;
    const std::vector<double> all = PriceSet(fh);
    std::vector<std::vector<double>> choices(fh.num_zones);
    for (int z = 0; z < fh.num_zones; ++z) {
      const double bar = ToEurPerMWh(targets_.lambda_bar(z, t));
      const double eta = ToEurPerMWh(bands_.eta_d(z, t));
      for (double v : all) {
        if (std::abs(v - bar) <= eta) choices[z].push_back(v);
      }
    }
    struct Candidate {
      double obj;
      std::vector<double> lam;
    };
    std::vector<Candidate> candidates;
    QpSolver qp(model.lp(), model.quad(), p_.predict.lp);
    Eigen::VectorXd blo;
    Eigen::VectorXd bhi;
    const bool within = ForEachVector(choices, p_.max_price_vectors,
                                      [&](const std::vector<double>& lam) {
                                        if (!model.Fix({lam}, 0.0, &blo, &bhi))
                                          return;
                                        const QpSolution s = qp.Solve(blo, bhi);
                                        ++stats->price_vectors;
                                        if (s.optimal())
                                          candidates.push_back({s.obj, lam});
                                      });
    if (!within) {
      throw SolverError(
          fmt::format("fidelity recovery: hour {}: more than {} price vectors",
                      t, p_.max_price_vectors));
    }
    std::stable_sort(
        candidates.begin(), candidates.end(),
        [](const Candidate& a, const Candidate& b) { return a.obj < b.obj; });
    const double margin = p_.interior_margin * model.scale();
    for (const Candidate& cand : candidates) {
      for (const double delta : {0.0, margin}) {
        if (!model.Fix({cand.lam}, delta, &blo, &bhi)) continue;
        const QpSolution s = qp.Solve(blo, bhi);
        ++stats->price_vectors;
        if (!s.optimal()) continue;
        const Eigen::VectorXd d = model.Loads(s.x, 0);
        const Checked c = Check(t, d);
        if (c.prices_ok && (c.cost_ok || !cost_band)) {
          if (delta > 0.0) ++stats->margin_retries;
          return HourChoice{cand.lam, delta, d};
        }
      }
    }
    return std::nullopt;
  }

  // Exact re-clear of hour t at loads d (MWh) against the bands.
  Checked Check(int t, const Eigen::VectorXd& d) const {
    Checked c;
    FollowerOutcome f = internal::EmptyOutcome(sys_);
    try {
      internal::ClearHour(sys_, t, targets_.bounds, d * kWhPerMWh,
                          p_.predict.lp, &f);
    } catch (const InfeasibleError&) {
      return c;
    }
    c.lambda = f.lambda.col(t) * kWhPerMWh;
    c.cost = f.hourly_cost[t];
    c.prices_ok = true;
    for (int z = 0; z < sys_.num_elec_zones(); ++z) {
      const double bar = ToEurPerMWh(targets_.lambda_bar(z, t));
      const double eta = ToEurPerMWh(bands_.eta_d(z, t));
      if (!(std::abs(c.lambda[z] - bar) <= eta + kPriceSlack))
        c.prices_ok = false;
    }
    c.cost_ok = std::abs(c.cost - targets_.omega_bar[t]) <=
                bands_.eta_p[t] + kCostSlack;
    return c;
  }

  // Smallest (price, cost) violation over price vectors near the bands.
  [[noreturn]] void Fail(int t) const {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(sys_.horizon, -kInf);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(sys_.horizon, kInf);
    RecoveryModel model(sys_, {t}, targets_.bounds, d_tilde_, lo, hi,
                        std::nullopt);
    const FollowerHour& fh = model.blocks()[0].fh;
    const std::vector<double> all = PriceSet(fh);
    std::vector<std::vector<double>> choices(fh.num_zones);
    std::vector<double> bar(fh.num_zones);
    std::vector<double> eta(fh.num_zones);
    for (int z = 0; z < fh.num_zones; ++z) {
      bar[z] = ToEurPerMWh(targets_.lambda_bar(z, t));
      eta[z] = ToEurPerMWh(bands_.eta_d(z, t));
      double below = -kInf;
      double above = kInf;
      for (double v : all) {
        if (std::abs(v - bar[z]) <= eta[z]) {
          choices[z].push_back(v);
        } else if (v < bar[z]) {
          below = std::max(below, v);
        } else {
          above = std::min(above, v);
        }
      }
      if (std::isfinite(below)) choices[z].push_back(below);
      if (std::isfinite(above)) choices[z].push_back(above);
    }
    SimplexSolver lp(model.lp(), p_.predict.lp);
    const int cost_var = model.blocks()[0].cost;
    const double omega = targets_.omega_bar[t];
    double best_price = kInf;
    double best_cost = kInf;
    Eigen::VectorXd blo;
    Eigen::VectorXd bhi;
    ForEachVector(
        choices, p_.max_price_vectors, [&](const std::vector<double>& lam) {
          double price = 0.0;
          for (size_t z = 0; z < lam.size(); ++z) {
            price = std::max(price, std::abs(lam[z] - bar[z]) - eta[z]);
          }
          if (price > best_price) return;
          if (!model.Fix({lam}, 0.0, &blo, &bhi)) return;
          lp.SetBounds(blo, bhi);
          Eigen::VectorXd c = Eigen::VectorXd::Zero(blo.size());
          c[cost_var] = 1.0;
          lp.SetCost(c);
          const LpSolution lo_s = lp.Solve();
          if (!lo_s.optimal()) return;
          lp.SetCost(-c);
          const LpSolution hi_s = lp.Solve();
          if (!hi_s.optimal()) return;
          const double wmin = lo_s.x[cost_var];
          const double wmax = hi_s.x[cost_var];
          const double cost = std::max({0.0, wmin - (omega + bands_.eta_p[t]),
                                        (omega - bands_.eta_p[t]) - wmax});
          if (price < best_price || (price == best_price && cost < best_cost)) {
            best_price = price;
            best_cost = cost;
          }
        });
    throw FidelityError(t, std::max(0.0, ToEurPerWh(best_price)), best_cost);
  }

 private:
  const EnergySystem& sys_;
  const Eigen::MatrixXd& d_tilde_;
  const FidelityTargets& targets_;
  const FidelityBands& bands_;
  const PrivacyParams& p_;
};

void Finish(const EnergySystem& sys, const Eigen::MatrixXd& d_tilde,
            const FidelityTargets& targets, const PrivacyParams& p,
            FidelityResult* r) {
  const FollowerOutcome f =
      ClearFollower(sys, r->d_hat, targets.bounds, p.predict.lp);
  r->lambda_hat = f.lambda;
  r->omega_hat = f.hourly_cost;
  r->price_residual = 0.0;
  for (int t = 0; t < sys.horizon; ++t) {
    for (int z = 0; z < sys.num_elec_zones(); ++z) {
      r->price_residual =
          std::max(r->price_residual,
                   std::abs(f.lambda(z, t) - targets.lambda_bar(z, t)) -
                       r->bands.eta_d(z, t));
    }
  }
  const double omega_bar = targets.omega_bar.sum();
  r->cost_residual =
      std::max(0.0, std::abs(f.cost - omega_bar) - r->bands.eta_p.sum());
  if (std::isnan(r->cost_residual)) r->cost_residual = 0.0;
  r->distance = (ToMWh(1.0) * (r->d_hat - d_tilde)).squaredNorm();
}

}  // namespace

FidelityResult RecoverFidelity(const EnergySystem& sys,
                               const Eigen::MatrixXd& d_tilde,
                               const FidelityTargets& targets,
                               const PrivacyParams& p) {
  p.Validate(0);
  const int nz = sys.num_elec_zones();
  const int nu = static_cast<int>(sys.units.size());
  if (d_tilde.rows() != nz || d_tilde.cols() != sys.horizon) {
    throw ValidationError("fidelity recovery: load matrix shape mismatch");
  }
  if (targets.bounds.e_min.rows() != nu ||
      targets.bounds.e_min.cols() != sys.horizon ||
      targets.bounds.e_max.rows() != nu ||
      targets.bounds.e_max.cols() != sys.horizon ||
      targets.omega_bar.size() != sys.horizon ||
      targets.lambda_bar.rows() != nz ||
      targets.lambda_bar.cols() != sys.horizon) {
    throw ValidationError("fidelity recovery: prediction shape mismatch");
  }
  if (!d_tilde.allFinite() || !targets.omega_bar.allFinite() ||
      !targets.lambda_bar.allFinite()) {
    throw ValidationError("fidelity recovery: predictions must be finite");
  }
  FidelityResult r;
  r.bands = FidelityBandsFor(targets, p);
  r.d_hat = Eigen::MatrixXd::Zero(nz, sys.horizon);
  const Recovery rec(sys, d_tilde, targets, r.bands, p);

  if (p.budget_split == BudgetSplit::kCoupled) {
    std::vector<std::vector<double>> lam;
    std::vector<int> hours;
    bool patterns = true;
    double margin = 0.0;
    for (int t = 0; t < sys.horizon && patterns; ++t) {
      const auto choice = rec.SolveHour(t, false, &r);
      if (!choice) {
        patterns = false;
        break;
      }
      lam.push_back(choice->lam);
      hours.push_back(t);
      margin = std::max(margin, choice->delta);
    }
    if (patterns) {
      const double omega = targets.omega_bar.sum();
      const double eta = std::isinf(p.eta_p) ? kInf : p.eta_p * std::abs(omega);
      const Eigen::VectorXd free_lo =
          Eigen::VectorXd::Constant(sys.horizon, -kInf);
      const Eigen::VectorXd free_hi =
          Eigen::VectorXd::Constant(sys.horizon, kInf);
      RecoveryModel model(sys, hours, targets.bounds, d_tilde, free_lo, free_hi,
                          std::make_pair(omega - eta, omega + eta));
      QpSolver qp(model.lp(), model.quad(), p.predict.lp);
      for (const double delta : {margin, p.interior_margin * model.scale()}) {
        Eigen::VectorXd lo;
        Eigen::VectorXd hi;
        if (!model.Fix(lam, delta, &lo, &hi)) continue;
        const QpSolution s = qp.Solve(lo, hi);
        ++r.price_vectors;
        if (!s.optimal()) continue;
        FidelityResult trial = r;
        for (size_t k = 0; k < hours.size(); ++k) {
          trial.d_hat.col(hours[k]) = model.Loads(s.x, k) * kWhPerMWh;
        }
        Finish(sys, d_tilde, targets, p, &trial);
        if (trial.price_residual <= ToEurPerWh(kPriceSlack) &&
            trial.cost_residual <= kCostSlack) {
          if (delta > 0.0) ++trial.margin_retries;
          return trial;
        }
      }
    }
    // The per-hour split is a feasible point of the daily constraint.
  }

  for (int t = 0; t < sys.horizon; ++t) {
    const auto choice = rec.SolveHour(t, true, &r);
    if (!choice) rec.Fail(t);
    r.d_hat.col(t) = choice->d_hat * kWhPerMWh;
  }
  Finish(sys, d_tilde, targets, p, &r);
  return r;
}

namespace {

// Re-raises `e` with the pipeline step prefixed, keeping its type.
template <typename F>
auto Step(const char* label, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const FidelityError&) {
    throw;
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(fmt::format("{}: {}", label, e.what()));
  } catch (const SolverError& e) {
    throw SolverError(fmt::format("{}: {}", label, e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", label, e.what()));
  }
}

}  // namespace

PpsmTrace RunPpsmFromRelease(const EnergySystem& sys,
                             const Eigen::MatrixXd& heat_loads,
                             ObfuscationResult obfuscation,
                             const PrivacyParams& p) {
  p.Validate(sys.horizon);
  PpsmTrace trace;
  trace.obfuscation = std::move(obfuscation);
  const Eigen::MatrixXd& d_tilde = trace.obfuscation.d_tilde;
  const bool noisy = trace.obfuscation.xi.size() > 0 &&
                     trace.obfuscation.xi.cwiseAbs().maxCoeff() > 0.0;
  trace.prediction_loads =
      PredictionLoads(sys, d_tilde, noisy ? trace.obfuscation.scale : 0.0, p);
  trace.leader = Step("step 2 (leader prediction)", [&] {
    return PredictLeaderPrices(sys, heat_loads, trace.prediction_loads,
                               p.predict);
  });
  trace.follower = Step("step 3 (follower prediction)", [&] {
    return PredictFollower(sys, trace.prediction_loads, trace.leader.bounds,
                           p.predict.lp);
  });
  const FidelityTargets targets{trace.leader.bounds, trace.follower.hourly_cost,
                                trace.follower.lambda};
  trace.fidelity = Step("step 4 (fidelity recovery)", [&] {
    return RecoverFidelity(sys, d_tilde, targets, p);
  });
  return trace;
}

PpsmTrace RunPpsm(const EnergySystem& sys, const Eigen::MatrixXd& heat_loads,
                  const Eigen::MatrixXd& d_true, const PrivacyParams& p,
                  const PpsmHooks& hooks) {
  p.Validate(sys.horizon);
  if (d_true.rows() != sys.num_elec_zones() || d_true.cols() != sys.horizon) {
    throw ValidationError("run_ppsm: load matrix shape mismatch");
  }
  ObfuscationResult obf =
      Step("step 1 (obfuscation)", [&] { return ObfuscateStream(d_true, p); });
  if (hooks.zero_noise) {
    obf.xi.setZero();
    obf.d_tilde = d_true;
  }
  if (hooks.after_obfuscation) hooks.after_obfuscation();
  return RunPpsmFromRelease(sys, heat_loads, std::move(obf), p);
}

}  // namespace dpsc
