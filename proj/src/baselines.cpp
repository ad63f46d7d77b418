// Copyright 2026 The privdetect Authors
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

#include "privdetect/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "privdetect/error.hpp"
#include "privdetect/lp.hpp"
#include "privdetect/prob.hpp"
#include "privdetect/uncertainty.hpp"

namespace privdetect {

const char* to_string(BaselineMetric metric) noexcept {
  switch (metric) {
    case BaselineMetric::kInfoPrivacy: return "info_privacy";
    case BaselineMetric::kAvgLeakage: return "avg_leakage";
    case BaselineMetric::kMaximalLeakage: return "maximal_leakage";
    case BaselineMetric::kLocalDp: return "local_dp";
  }
  return "unknown";
}

const char* to_string(Anchor anchor) noexcept {
  return anchor == Anchor::kNominal ? "nominal" : "mf";
}

FusionErrors evaluate_errors(const FusionLaw& law, double delta, std::uint64_t tie_seed) {
  FusionErrors e;
  const ConditionalTable zg = law.z_given_g();
  const Distribution pg = law.p_g();
  e.h = bayes_error(law.p_h(), law.z_given_h());
  e.nominal = bayes_error(pg, zg);
  e.mf = delta > 0.0 ? bayes_error(pg, build_mfd(zg, delta, tie_seed).cond_mf) : e.nominal;
  return e;
}

namespace {

void fill_errors(BaselineResult& r, const FusionLaw& law, double delta) {
  const FusionErrors e = evaluate_errors(law, delta);
  r.error_h = e.h;
  r.error_nominal = e.nominal;
  r.error_mf = e.mf;
}

// I(G; Z) from a joint table p[i * 2 + g]; 0 log 0 = 0.
double mi_from_joint(const std::vector<double>& p) {
  const std::size_t n = p.size() / 2;
  double pg[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    pg[0] += p[2 * i];
    pg[1] += p[2 * i + 1];
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pz = p[2 * i] + p[2 * i + 1];
    for (std::size_t g = 0; g < 2; ++g) {
      const double v = p[2 * i + g];
      if (v > 0.0) mi += v * std::log(v / (pz * pg[g]));
    }
  }
  return std::max(0.0, mi);
}

// Leakage geometry of sensor t: P(z_t, rest, g) = sum_x w[x][rest][g] q(z_t | x).
struct LeakageSlice {
  std::size_t nx = 0;
  std::size_t nz = 0;
  std::size_t nr = 1;
  std::vector<double> w;  // [(x * nr + r) * 2 + g]

  std::vector<double> joint(const std::vector<double>& q) const {
    std::vector<double> p(nz * nr * 2, 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t z = 0; z < nz; ++z) {
        const double qz = q[x * nz + z];
        if (qz == 0.0) continue;
        for (std::size_t r = 0; r < nr; ++r) {
          p[(z * nr + r) * 2 + 0] += qz * w[(x * nr + r) * 2 + 0];
          p[(z * nr + r) * 2 + 1] += qz * w[(x * nr + r) * 2 + 1];
        }
      }
    }
    return p;
  }
  double leakage(const std::vector<double>& q) const { return mi_from_joint(joint(q)); }

  // d I / d q(z|x) at q; finite wherever P(z, r, g) > 0.
  std::vector<double> gradient(const std::vector<double>& q) const {
    const std::vector<double> p = joint(q);
    double pg[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < p.size() / 2; ++i) {
      pg[0] += p[2 * i];
      pg[1] += p[2 * i + 1];
    }
    std::vector<double> dp(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size() / 2; ++i) {
      const double pz = p[2 * i] + p[2 * i + 1];
      for (std::size_t g = 0; g < 2; ++g) {
        if (p[2 * i + g] > 0.0) dp[2 * i + g] = std::log(p[2 * i + g] / (pz * pg[g]));
      }
    }
    std::vector<double> out(nx * nz, 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t z = 0; z < nz; ++z) {
        double acc = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
          acc += w[(x * nr + r) * 2 + 0] * dp[(z * nr + r) * 2 + 0] +
                 w[(x * nr + r) * 2 + 1] * dp[(z * nr + r) * 2 + 1];
        }
        out[x * nz + z] = acc;
      }
    }
    return out;
  }
};

LeakageSlice leakage_slice(const JointModel& model, const StochasticMapping& mapping,
                           std::size_t t, std::size_t cap) {
  const SensorSlice slice = sensor_slice(model, mapping, t, cap);
  LeakageSlice ls;
  ls.nx = slice.nx;
  ls.nz = slice.nz;
  ls.nr = slice.num_rest;
  ls.w.resize(ls.nx * ls.nr * 2);
  for (std::size_t i = 0; i < ls.nx * ls.nr; ++i) {
    const double* p = &slice.table[i * 4];
    ls.w[i * 2 + 0] = p[hg_index(0, 0)] + p[hg_index(1, 0)];
    ls.w[i * 2 + 1] = p[hg_index(0, 1)] + p[hg_index(1, 1)];
  }
  return ls;
}

constexpr double kKelleyTol = 1e-8;
constexpr std::size_t kMaxCuts = 200;

// min C . q over row-stochastic q subject to I(q) <= eps_a, by Kelley's method.
// Cost and leakage depend on the randomization over deterministic rules only
// through q, so the cut loop runs on the |X||Z| entries of q.
std::optional<SensorDesign> leakage_step(const LeakageSlice& ls, const std::vector<double>& cost,
                                         double eps_a) {
  const std::size_t nx = ls.nx;
  const std::size_t nz = ls.nz;
  const std::size_t n = nx * nz;
  LinearProgram lp;
  lp.objective = cost;
  for (std::size_t x = 0; x < nx; ++x) {
    std::vector<double> row(n, 0.0);
    for (std::size_t z = 0; z < nz; ++z) row[x * nz + z] = 1.0;
    lp.a_eq.push_back(std::move(row));
    lp.b_eq.push_back(1.0);
  }

  std::vector<double> q(n);
  bool converged = false;
  for (std::size_t cut = 0; cut <= kMaxCuts; ++cut) {
    const LpSolution sol = solve(lp);
    if (sol.status != LpStatus::kOptimal) return std::nullopt;
    for (std::size_t x = 0; x < nx; ++x) {
      double total = 0.0;
      for (std::size_t z = 0; z < nz; ++z) total += (q[x * nz + z] = std::max(0.0, sol.values[x * nz + z]));
      for (std::size_t z = 0; z < nz; ++z) q[x * nz + z] /= total;
    }
    if (ls.leakage(q) <= eps_a + kKelleyTol) {
      converged = true;
      break;
    }
    // Linearize at a point nudged toward uniform so every log term is finite;
    // any point gives a valid cut since I is convex in q.
    constexpr double kNudge = 1e-6;
    std::vector<double> qc(n);
    for (std::size_t i = 0; i < n; ++i) {
      qc[i] = (1.0 - kNudge) * q[i] + kNudge / static_cast<double>(nz);
    }
    std::vector<double> grad = ls.gradient(qc);
    double rhs = eps_a - ls.leakage(qc);
    for (std::size_t i = 0; i < n; ++i) rhs += grad[i] * qc[i];
    double scale = 0.0;
    for (double v : grad) scale = std::max(scale, std::abs(v));
    if (!(scale > 0.0)) scale = 1.0;
    for (double& v : grad) v /= scale;
    lp.a_ub.push_back(std::move(grad));
    lp.b_ub.push_back(rhs / scale);
  }

  Channel chosen(nx, nz, q);
  double uniform_weight = 0.0;
  if (!converged) {
    // Pull toward uniform, which leaves only I(G; rest) <= the current leakage.
    const Channel uni = Channel::uniform(nx, nz);
    if (ls.leakage(uni.entries()) > eps_a + kKelleyTol) return std::nullopt;
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ls.leakage(chosen.mix(uni, mid).entries()) <= eps_a ? hi : lo) = mid;
    }
    uniform_weight = hi;
  }
  SensorDesign design;
  design.from_lp = true;
  design.support = decompose_channel(chosen);
  design.uniform_weight = uniform_weight;
  return design;
}

}  // namespace

double average_leakage(const FusionLaw& law) {
  const Distribution j = law.joint_zg();
  return mi_from_joint(j.vec());
}

BaselineResult optimize_avg_leakage(const JointModel& model, double eps_a,
                                    const PbpoConfig& config) {
  if (!(eps_a >= 0.0)) throw ValidationError("optimize_avg_leakage: eps_a must be >= 0");
  auto step = [&](const StochasticMapping& mapping, const FusionRule& rule,
                  std::size_t t) -> std::optional<SensorDesign> {
    const LeakageSlice ls = leakage_slice(model, mapping, t, config.cap);
    // A deterministic minimizer within budget wins outright, with ties broken
    // as in the information-privacy step so a slack budget reproduces it.
    const SensorCoefficients co =
        lp_coefficients_for_sensor(model, mapping, rule, t, config.exec, config.cap);
    const WeightsSolution best = solve_weights_simplex(
        co.cost, co.privacy, -std::numeric_limits<double>::infinity());
    const std::size_t index = best.support.front().first;
    const DeterministicMapping phi = phi_from_index(index, ls.nx, ls.nz);
    std::vector<double> q(ls.nx * ls.nz, 0.0);
    for (std::size_t x = 0; x < ls.nx; ++x) q[x * ls.nz + phi.table[x]] = 1.0;
    if (ls.leakage(q) <= eps_a) {
      SensorDesign design;
      design.support = {{index, 1.0}};
      design.from_lp = true;
      return design;
    }
    return leakage_step(ls, sensor_cost_matrix(model, mapping, rule, t, config.cap), eps_a);
  };
  auto slack = [&](const FusionLaw& law) { return eps_a - average_leakage(law); };
  const PbpoResult res = detail::person_by_person(model, config, step, slack, kKelleyTol);

  BaselineResult out;
  out.metric = BaselineMetric::kAvgLeakage;
  out.parameter = eps_a;
  out.mapping = res.mapping;
  const FusionLaw law = push_forward(model, res.mapping, config.cap);
  fill_errors(out, law, config.delta);
  out.leakage = average_leakage(law);
  return out;
}

CentralizedMapping maximal_leakage_channel(const JointModel& model, double eps_ml,
                                           std::size_t cap) {
  if (!(eps_ml >= 0.0)) throw ValidationError("maximal_leakage: eps_ml must be >= 0");
  const double e = std::exp(eps_ml);
  if (e > 2.0 + 1e-12) {
    throw InfeasibleError("maximal_leakage: e^eps = " + std::to_string(e) +
                          " > 2 leaves the other columns negative");
  }
  const std::size_t s = model.num_sensors();
  const std::size_t nz_total = checked_power(model.quant_alphabet(), s, cap, "|Z|^s");
  const TensorLaw law = model.expand(cap);
  const ConditionalTable xg = law.x_given_g();
  const std::size_t nxs = law.num_x();
  const double rest = std::max(0.0, 2.0 - e);
  if (nz_total == 2 && rest > 1e-12) {
    throw InfeasibleError("maximal_leakage: |Z|^s = 2 admits only eps = log 2");
  }
  const double other = nz_total > 2 ? rest / static_cast<double>(nz_total - 2) : 0.0;

  CentralizedMapping m;
  m.num_x = nxs;
  m.num_z = nz_total;
  m.q.assign(nxs * nz_total, other);
  for (std::size_t x = 0; x < nxs; ++x) {
    // Ties belong to I+ only so that each row carries e^eps - 1 once.
    const bool plus = xg(1, x) >= xg(0, x);
    m.q[x * nz_total + 0] = plus ? e - 1.0 : 0.0;
    m.q[x * nz_total + 1] = plus ? 0.0 : e - 1.0;
  }
  return m;
}

double maximal_leakage_of(const CentralizedMapping& mapping) {
  double acc = 0.0;
  for (std::size_t z = 0; z < mapping.num_z; ++z) {
    double mx = 0.0;
    for (std::size_t x = 0; x < mapping.num_x; ++x) {
      mx = std::max(mx, mapping.q[x * mapping.num_z + z]);
    }
    acc += mx;
  }
  return std::log(acc);
}

BaselineResult maximal_leakage_mapping(const JointModel& model, double eps_ml, double delta,
                                       std::size_t cap) {
  BaselineResult out;
  out.metric = BaselineMetric::kMaximalLeakage;
  out.parameter = eps_ml;
  CentralizedMapping m = maximal_leakage_channel(model, eps_ml, cap);
  const FusionLaw law = push_forward(model.expand(cap), m);
  fill_errors(out, law, delta);
  out.leakage = maximal_leakage_of(m);
  out.mapping = std::move(m);
  return out;
}

Channel local_dp_channel(std::size_t nx, std::size_t nz, double eps_l) {
  if (!(eps_l >= 0.0)) throw ValidationError("local_dp: eps_l must be >= 0");
  if (nz < 2 || nx < nz) throw ValidationError("local_dp: need 2 <= |Z| <= |X|");
  std::vector<double> q(nx * nz);
  if (std::isinf(eps_l)) {
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t z = 0; z < nz; ++z) q[x * nz + z] = z == x % nz ? 1.0 : 0.0;
    }
    return Channel(nx, nz, std::move(q));
  }
  // e^eps / (e^eps + |Z| - 1) rewritten to stay finite for large eps.
  const double lo = 1.0 / (std::exp(eps_l) + static_cast<double>(nz - 1));
  const double hi = 1.0 - static_cast<double>(nz - 1) * lo;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t z = 0; z < nz; ++z) q[x * nz + z] = z == x % nz ? hi : lo;
  }
  return Channel(nx, nz, std::move(q));
}

StochasticMapping local_dp_mapping(std::size_t s, std::size_t nx, std::size_t nz, double eps_l) {
  return StochasticMapping(std::vector<Channel>(s, local_dp_channel(nx, nz, eps_l)), 0.0);
}

BaselineResult evaluate_local_dp(const JointModel& model, double eps_l, double delta,
                                 std::size_t cap) {
  BaselineResult out;
  out.metric = BaselineMetric::kLocalDp;
  out.parameter = eps_l;
  StochasticMapping m =
      local_dp_mapping(model.num_sensors(), model.obs_alphabet(), model.quant_alphabet(), eps_l);
  fill_errors(out, push_forward(model, m, cap), delta);
  out.leakage = eps_l;
  out.mapping = std::move(m);
  return out;
}

namespace {

double anchor_error(const BaselineResult& r, Anchor anchor) {
  return anchor == Anchor::kNominal ? r.error_nominal : r.error_mf;
}

// The anchor error falls as the leakage parameter grows. Bisect on [lo, hi]
// for the parameter whose anchor error equals `target`, keeping the closest
// point on the private side (error >= target) so no baseline is compared at a
// weaker privacy level than the reference run.
CalibratedRow calibrate(const std::function<BaselineResult(double)>& run, double lo, double hi,
                        double target, Anchor anchor, const CompareOptions& opt) {
  CalibratedRow row;
  std::optional<BaselineResult> priv;  // smallest error >= target
  std::optional<BaselineResult> near;  // smallest |error - target|
  auto eval = [&](double p) {
    BaselineResult r = run(p);
    ++row.evaluations;
    const double e = anchor_error(r, anchor);
    if (e >= target && (!priv || e < anchor_error(*priv, anchor))) priv = r;
    if (!near || std::abs(e - target) < std::abs(anchor_error(*near, anchor) - target)) near = r;
    return e;
  };
  auto done = [&] { return priv && anchor_error(*priv, anchor) - target <= opt.tolerance; };
  double e_lo = eval(lo);
  double e_hi = eval(hi);
  if (e_lo >= target && e_hi <= target) {
    for (std::size_t it = 0; it < opt.max_bisections && !done(); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double e = eval(mid);
      if (e > e_lo + kCompareTol || e < e_hi - kCompareTol) row.monotone = false;
      if (e >= target) {
        lo = mid;
        e_lo = e;
      } else {
        hi = mid;
        e_hi = e;
      }
    }
  }
  row.result = priv ? *priv : *near;
  row.achieved = anchor_error(row.result, anchor);
  row.matched = std::abs(row.achieved - target) <= opt.tolerance;
  row.bracket_lo = lo;
  row.bracket_hi = hi;
  return row;
}

}  // namespace

ComparisonTable calibrate_and_compare(const JointModel& model, const PbpoConfig& config,
                                      const CompareOptions& options) {
  ComparisonTable table;
  table.anchor = options.anchor.value_or(config.delta > 0.0 ? Anchor::kMostFavorable
                                                            : Anchor::kNominal);
  table.i_xh_given_g = conditional_mi_xh_given_g(model, config.cap);

  const PbpoResult info = pbpo_optimize(model, config);
  CalibratedRow info_row;
  info_row.result.metric = BaselineMetric::kInfoPrivacy;
  info_row.result.parameter = config.r ? *config.r : *config.epsilon;
  const FusionLaw info_law = push_forward(model, info.mapping, config.cap);
  fill_errors(info_row.result, info_law, config.delta);
  info_row.result.leakage = average_leakage(info_law);
  info_row.result.mapping = info.mapping;
  table.target = anchor_error(info_row.result, table.anchor);
  info_row.achieved = table.target;
  info_row.matched = true;
  info_row.evaluations = 1;
  table.rows.push_back(std::move(info_row));

  // I(G; X) bounds every I(G; Z), so eps_a beyond it is slack.
  const TensorLaw law = model.expand(config.cap);
  const double i_gx = mutual_information(law.x_given_g(), law.p_g());
  table.rows.push_back(calibrate(
      [&](double eps) { return optimize_avg_leakage(model, eps, config); }, 0.0, i_gx,
      table.target, table.anchor, options));

  // Randomized response saturates quickly; grow the bracket until it is reached.
  double ldp_hi = 1.0;
  while (ldp_hi < 64.0 &&
         anchor_error(evaluate_local_dp(model, ldp_hi, config.delta, config.cap), table.anchor) >
             table.target) {
    ldp_hi *= 2.0;
  }
  table.rows.push_back(calibrate(
      [&](double eps) { return evaluate_local_dp(model, eps, config.delta, config.cap); }, 0.0,
      ldp_hi, table.target, table.anchor, options));

  const std::size_t nz_total =
      checked_power(model.quant_alphabet(), model.num_sensors(), config.cap, "|Z|^s");
  if (options.include_maximal_leakage && config.delta > 0.0 && nz_total > 2) {
    table.rows.push_back(calibrate(
        [&](double eps) { return maximal_leakage_mapping(model, eps, config.delta, config.cap); },
        0.0, std::log(2.0), table.target, table.anchor, options));
  }
  return table;
}

}  // namespace privdetect
