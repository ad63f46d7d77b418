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

#include "privdetect/pbpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "privdetect/error.hpp"
#include "privdetect/io.hpp"
#include "privdetect/lp.hpp"
#include "privdetect/random.hpp"

namespace privdetect {

FusionRule bayes_fusion_rule(const FusionLaw& law) {
  FusionRule rule;
  rule.decide.resize(law.num_z);
  for (std::size_t z = 0; z < law.num_z; ++z) {
    const double* p = &law.joint[z * 4];
    const double h0 = p[hg_index(0, 0)] + p[hg_index(0, 1)];
    const double h1 = p[hg_index(1, 0)] + p[hg_index(1, 1)];
    rule.decide[z] = h1 > h0 ? 1 : 0;
  }
  return rule;
}

FusionRule bayes_fusion_rule(const JointModel& model, const StochasticMapping& mapping,
                             std::size_t z_cap) {
  return bayes_fusion_rule(push_forward(model, mapping, z_cap));
}

double fusion_error(const FusionLaw& law, const FusionRule& rule) {
  if (rule.decide.size() != law.num_z) throw ValidationError("fusion_error: rule size mismatch");
  double err = 0.0;
  for (std::size_t z = 0; z < law.num_z; ++z) {
    const std::size_t wrong = rule.decide[z] == 0 ? 1 : 0;
    err += law.joint[z * 4 + hg_index(wrong, 0)] + law.joint[z * 4 + hg_index(wrong, 1)];
  }
  return err;
}

std::size_t phi_count(std::size_t nx, std::size_t nz, std::size_t cap) {
  return checked_power(nz, nx, cap, "deterministic mapping count |Z|^|X|");
}

DeterministicMapping phi_from_index(std::size_t index, std::size_t nx, std::size_t nz) {
  DeterministicMapping phi;
  phi.nz = nz;
  phi.table.resize(nx);
  for (std::size_t x = nx; x-- > 0;) {
    phi.table[x] = static_cast<std::uint32_t>(index % nz);
    index /= nz;
  }
  return phi;
}

std::vector<DeterministicMapping> enumerate_phi(std::size_t nx, std::size_t nz, std::size_t cap) {
  const std::size_t n = phi_count(nx, nz, cap);
  std::vector<DeterministicMapping> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(phi_from_index(i, nx, nz));
  return out;
}

namespace {

// Privacy slack tolerated on accepted updates.
constexpr double kAcceptTol = 1e-12;

// C[x][z] = P(x_t = x, gamma wrong | z_t = z); the cost is linear in q_t through it.
std::vector<double> cost_matrix(const SensorSlice& slice, const FusionRule& rule) {
  const std::size_t nx = slice.nx;
  const std::size_t nz = slice.nz;
  const std::size_t nr = slice.num_rest;
  if (rule.decide.size() != nz * nr) throw ValidationError("sensor coefficients: rule size mismatch");
  std::vector<double> c(nx * nz, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t z = 0; z < nz; ++z) {
      double acc = 0.0;
      for (std::size_t r = 0; r < nr; ++r) {
        const std::size_t wrong = rule.decide[slice.full_index(z, r)] == 0 ? 1 : 0;
        const double* p = &slice.table[(x * nr + r) * 4];
        acc += p[hg_index(wrong, 0)] + p[hg_index(wrong, 1)];
      }
      c[x * nz + z] = acc;
    }
  }
  return c;
}

}  // namespace

std::size_t phi_index(const DeterministicMapping& phi) {
  std::size_t index = 0;
  for (std::uint32_t z : phi.table) index = index * phi.nz + z;
  return index;
}

std::vector<double> sensor_cost_matrix(const JointModel& model, const StochasticMapping& mapping,
                                       const FusionRule& rule, std::size_t t, std::size_t cap) {
  return cost_matrix(sensor_slice(model, mapping, t, cap), rule);
}

std::vector<std::pair<std::size_t, double>> decompose_channel(const Channel& q, double tol) {
  const std::size_t nx = q.nx();
  const std::size_t nz = q.nz();
  std::vector<double> rem = q.entries();
  std::vector<std::pair<std::size_t, double>> out;
  double left = 1.0;
  while (left > tol) {
    // Each step zeroes at least one entry, so this ends within nx * nz steps.
    DeterministicMapping phi;
    phi.nz = nz;
    phi.table.resize(nx);
    double w = left;
    for (std::size_t x = 0; x < nx; ++x) {
      std::size_t best = 0;
      for (std::size_t z = 1; z < nz; ++z) {
        if (rem[x * nz + z] > rem[x * nz + best]) best = z;
      }
      phi.table[x] = static_cast<std::uint32_t>(best);
      w = std::min(w, rem[x * nz + best]);
    }
    if (!(w > tol)) break;
    for (std::size_t x = 0; x < nx; ++x) rem[x * nz + phi.table[x]] -= w;
    left -= w;
    out.emplace_back(phi_index(phi), w);
  }
  // Fold the rounding remainder into the heaviest component.
  if (!out.empty() && left != 0.0) {
    auto heaviest = std::max_element(out.begin(), out.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
    heaviest->second += left;
  }
  std::sort(out.begin(), out.end());
  return out;
}

SensorCoefficients lp_coefficients_for_sensor(const JointModel& model,
                                              const StochasticMapping& mapping,
                                              const FusionRule& rule, std::size_t t,
                                              Exec exec, std::size_t cap) {
  const SensorSlice slice = sensor_slice(model, mapping, t, cap);
  const std::size_t nx = slice.nx;
  const std::size_t nz = slice.nz;
  const std::size_t nr = slice.num_rest;
  if (rule.decide.size() != nz * nr) throw ValidationError("sensor coefficients: rule size mismatch");
  const std::size_t n_phi = phi_count(nx, nz, cap);
  const Distribution pg = model.p_g();

  const std::vector<double> c = cost_matrix(slice, rule);
  // Privacy needs p(z_t, rest, g); fold H away first.
  std::vector<double> tg(nx * nr * 2);
  for (std::size_t i = 0; i < nx * nr; ++i) {
    const double* p = &slice.table[i * 4];
    tg[i * 2 + 0] = (p[hg_index(0, 0)] + p[hg_index(1, 0)]) / pg[0];
    tg[i * 2 + 1] = (p[hg_index(0, 1)] + p[hg_index(1, 1)]) / pg[1];
  }

  SensorCoefficients out;
  out.cost.resize(n_phi);
  out.privacy.resize(n_phi);
  parallel_for(n_phi, exec, [&](std::size_t i) {
    const DeterministicMapping phi = phi_from_index(i, nx, nz);
    double cost = 0.0;
    for (std::size_t x = 0; x < nx; ++x) cost += c[x * nz + phi.table[x]];
    std::vector<double> diff(nz * nr, 0.0);  // p(z|G=0) - p(z|G=1)
    for (std::size_t x = 0; x < nx; ++x) {
      double* d = &diff[phi.table[x] * nr];
      const double* src = &tg[x * nr * 2];
      for (std::size_t r = 0; r < nr; ++r) d[r] += src[2 * r] - src[2 * r + 1];
    }
    double tv = 0.0;
    for (double d : diff) tv += std::abs(d);
    out.cost[i] = cost;
    out.privacy[i] = 0.5 * (1.0 - std::min(1.0, 0.5 * tv));
  });
  return out;
}

void PbpoConfig::validate(std::size_t nz) const {
  if (r.has_value() == epsilon.has_value()) {
    throw ValidationError("pbpo config: supply exactly one of r and epsilon");
  }
  validate_loop(nz);
}

void PbpoConfig::validate_loop(std::size_t nz) const {
  if (!(delta >= 0.0 && delta < 1.0)) throw ValidationError("pbpo config: delta must lie in [0,1)");
  if (!(xi > 0.0)) throw ValidationError("pbpo config: xi must be positive");
  if (noise_scale && !(*noise_scale >= 0.0 && *noise_scale < 1.0 / static_cast<double>(nz))) {
    throw ValidationError("pbpo config: noise_scale must lie in [0, 1/|Z|)");
  }
  if (max_iters == 0) throw ValidationError("pbpo config: max_iters must be positive");
}

UncertaintySpec privacy_spec(const JointModel& model, const PbpoConfig& config) {
  UncertaintySpec spec;
  spec.delta = config.delta;
  spec.r = config.r;
  spec.epsilon = config.epsilon;
  spec.alpha = model.alpha(config.cap);
  spec.column_floor =
      std::pow(model.delta_floor(), static_cast<double>(model.num_sensors()));
  return spec;
}

namespace {

double nominal_privacy(const FusionLaw& law) { return min_avg_type12_error(law.z_given_g()); }

Channel initial_channel(std::size_t nx, std::size_t nz, double scale, Rng& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  const double base = 1.0 / static_cast<double>(nz);
  std::vector<double> q(nx * nz);
  for (std::size_t x = 0; x < nx; ++x) {
    std::vector<double> n(nz);
    double mean = 0.0;
    for (double& v : n) {
      v = u(rng);
      mean += v;
    }
    mean /= static_cast<double>(nz);
    double lowest = 0.0;
    for (double& v : n) {
      v -= mean;
      lowest = std::min(lowest, v);
    }
    // Centering can push an entry below -1/|Z|; shrink that row's noise.
    const double shrink = lowest < -base ? base / -lowest : 1.0;
    double sum = 0.0;
    for (std::size_t z = 0; z < nz; ++z) {
      q[x * nz + z] = std::max(0.0, base + shrink * n[z]);
      sum += q[x * nz + z];
    }
    for (std::size_t z = 0; z < nz; ++z) q[x * nz + z] /= sum;
  }
  return Channel(nx, nz, std::move(q));
}

void log_iteration(std::ostream& os, const PbpoIteration& it) {
  nlohmann::json rec;
  rec["k"] = it.k;
  rec["objective"] = it.objective;
  rec["privacy_slack"] = it.privacy_slack;
  rec["wall_seconds"] = it.wall_seconds;
  std::vector<int> acc(it.accepted.begin(), it.accepted.end());
  rec["accepted"] = acc;
  os << dump_json(rec, -1);
}

}  // namespace

double detail::floor_weight(const Channel& q, double floor) {
  const double target = static_cast<double>(q.nx()) / static_cast<double>(q.nz());
  const double low = q.min_column_sum();
  if (low >= floor) return 0.0;
  return std::min(1.0, (floor - low) / (target - low));
}

Channel realize_design(const SensorDesign& design, std::size_t nx, std::size_t nz) {
  std::vector<double> q(nx * nz, 0.0);
  for (const auto& [index, nu] : design.support) {
    const DeterministicMapping phi = phi_from_index(index, nx, nz);
    for (std::size_t x = 0; x < nx; ++x) q[x * nz + phi.table[x]] += nu;
  }
  const Channel mixed(nx, nz, std::move(q));
  return design.uniform_weight > 0.0 ? mixed.mix(Channel::uniform(nx, nz), design.uniform_weight)
                                     : mixed;
}

PbpoResult detail::person_by_person(const JointModel& model, const PbpoConfig& config,
                                    const SensorStep& step, const ConstraintSlack& slack,
                                    double accept_tol) {
  const std::size_t s = model.num_sensors();
  const std::size_t nx = model.obs_alphabet();
  const std::size_t nz = model.quant_alphabet();
  config.validate_loop(nz);
  phi_count(nx, nz, config.cap);
  checked_power(nz, s, config.cap, "fusion alphabet |Z|^s");
  const double floor = model.delta_floor();

  PbpoResult res;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  auto feasible = [&](const StochasticMapping& m) {
    return slack(push_forward(model, m, config.cap)) >= 0.0;
  };

  // Perturbed-uniform start, pulled toward uniform until feasible and floored.
  Rng rng(config.seed);
  const double scale = config.noise_scale.value_or(0.05 / static_cast<double>(nz));
  std::vector<Channel> init;
  for (std::size_t t = 0; t < s; ++t) {
    Channel q = initial_channel(nx, nz, scale, rng);
    const double w = floor_weight(q, floor);
    if (w > 0.0) q = q.mix(Channel::uniform(nx, nz), w);
    init.push_back(std::move(q));
  }
  StochasticMapping mapping(init, floor);
  if (!feasible(mapping)) {
    const StochasticMapping uniform = StochasticMapping::uniform(s, nx, nz, floor);
    double lo = 0.0;  // violates
    double hi = 1.0;  // uniform satisfies
    auto mixed = [&](double w) {
      std::vector<Channel> ch;
      for (std::size_t t = 0; t < s; ++t) ch.push_back(init[t].mix(uniform.sensor(t), w));
      return StochasticMapping(std::move(ch), floor);
    };
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mixed(mid)) ? hi : lo) = mid;
    }
    mapping = mixed(hi);
  }
  res.designs.assign(s, SensorDesign{});

  double previous = 1.0;  // E^(0)
  for (std::size_t k = 1; k <= config.max_iters; ++k) {
    PbpoIteration it;
    it.k = k;
    it.accepted.assign(s, false);
    const FusionRule rule = bayes_fusion_rule(model, mapping, config.cap);
    double current_cost = fusion_error(push_forward(model, mapping, config.cap), rule);

    for (std::size_t t = 0; t < s; ++t) {
      std::optional<SensorDesign> design = step(mapping, rule, t);
      if (!design) continue;  // keep q_t for this round
      Channel q = realize_design(*design, nx, nz);
      const double w = floor_weight(q, floor);
      if (w > 0.0) {
        design->uniform_weight = 1.0 - (1.0 - design->uniform_weight) * (1.0 - w);
        q = realize_design(*design, nx, nz);
      }

      const StochasticMapping candidate = mapping.with_sensor(t, q);
      const FusionLaw law = push_forward(model, candidate, config.cap);
      const double cost = fusion_error(law, rule);
      // A sensor still on its start mapping takes its first design outright (the start
      // need not be feasible for the weights program). Later updates must not raise
      // the cost; the small slack absorbs rounding when gamma ignores z_t.
      const bool first = !res.designs[t].from_lp;
      if ((first || cost <= current_cost + 1e-14) && slack(law) >= -accept_tol) {
        mapping = candidate;
        current_cost = cost;
        res.designs[t] = std::move(*design);
        it.accepted[t] = true;
      }
    }

    const FusionLaw law = push_forward(model, mapping, config.cap);
    it.rule = bayes_fusion_rule(law);
    it.objective = fusion_error(law, it.rule);
    it.mapping = mapping;
    it.privacy_slack = slack(law);
    it.wall_seconds = elapsed();
    if (config.log) log_iteration(*config.log, it);
    const double current = it.objective;
    res.trace.iterations.push_back(std::move(it));
    if (previous <= 0.0 || (previous - current) / previous <= config.xi) {
      res.trace.converged = true;
      break;
    }
    previous = current;
  }

  const PbpoIteration& last = res.trace.iterations.back();
  res.mapping = last.mapping;
  res.rule = last.rule;
  res.error = last.objective;
  return res;
}

PbpoResult pbpo_optimize(const JointModel& model, const PbpoConfig& config) {
  config.validate(model.quant_alphabet());
  const UncertaintySpec spec = privacy_spec(model, config);
  const double theta = threshold_theta(spec);
  const double theta_eff = theta / (1.0 - config.delta);
  if (theta_eff > 0.5 + 1e-15) {
    throw InfeasibleError("pbpo: threshold theta/(1-delta) = " + std::to_string(theta_eff) +
                          " exceeds 1/2; no mapping satisfies the privacy constraint");
  }
  auto step = [&](const StochasticMapping& mapping, const FusionRule& rule,
                  std::size_t t) -> std::optional<SensorDesign> {
    const SensorCoefficients co =
        lp_coefficients_for_sensor(model, mapping, rule, t, config.exec, config.cap);
    WeightsSolution ws = solve_weights_simplex(co.cost, co.privacy, theta_eff);
    // A binding constraint can leave even the constant phi a rounding error short.
    if (!ws.feasible) ws = solve_weights_simplex(co.cost, co.privacy, theta_eff - 0.5 * kAcceptTol);
    if (!ws.feasible) return std::nullopt;
    SensorDesign design;
    design.support = ws.support;
    design.from_lp = true;
    return design;
  };
  auto slack = [&](const FusionLaw& law) { return nominal_privacy(law) - theta_eff; };

  PbpoResult res = detail::person_by_person(model, config, step, slack, kAcceptTol);
  res.trace.theta = theta;
  res.trace.theta_eff = theta_eff;
  return res;
}

double info_privacy_budget_on_support(const ConditionalTable& cond, const Distribution& prior) {
  const Distribution pz = output_marginal(cond, prior);
  std::vector<std::size_t> keep;
  for (std::size_t z = 0; z < pz.size(); ++z) {
    if (pz[z] > 0.0) keep.push_back(z);
  }
  if (keep.size() == pz.size()) return info_privacy_budget(cond, prior);
  std::vector<Distribution> rows;
  for (std::size_t g = 0; g < cond.num_conditions(); ++g) {
    std::vector<double> m;
    for (std::size_t z : keep) m.push_back(cond(g, z));
    rows.push_back(Distribution::normalized(std::move(m)));
  }
  return info_privacy_budget(ConditionalTable(std::move(rows)), prior);
}

PrivacyReport validate_privacy(const JointModel& model, const StochasticMapping& mapping,
                               const UncertaintySpec& spec, std::uint64_t tie_seed,
                               std::size_t z_cap) {
  PrivacyReport rep;
  rep.theta = threshold_theta(spec);
  rep.theta_eff = rep.theta / (1.0 - spec.delta);
  const FusionLaw law = push_forward(model, mapping, z_cap);
  const ConditionalTable zg = law.z_given_g();
  rep.min_avg_err_nominal = min_avg_type12_error(zg);
  rep.slack = rep.min_avg_err_nominal - rep.theta_eff;
  rep.constraint_met = rep.slack >= -kCompareTol;
  const MfdResult mfd = build_mfd(zg, spec.delta, tie_seed);
  rep.r_mf = mfd.r_mf;
  rep.epsilon_achieved = info_privacy_budget_on_support(mfd.cond_mf, law.p_g());
  rep.epsilon_implied = implied_epsilon(rep.theta, spec.delta, spec.alpha, spec.column_floor);
  return rep;
}

}  // namespace privdetect
