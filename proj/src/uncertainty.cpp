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

#include "privdetect/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "privdetect/error.hpp"
#include "privdetect/random.hpp"

namespace privdetect {

namespace {

void require_delta(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw ValidationError("delta must lie in [0,1)");
}

void require_binary(const ConditionalTable& t, const char* op) {
  if (t.num_conditions() != 2) {
    throw ValidationError(std::string(op) + ": conditioning alphabet must be binary");
  }
}

}  // namespace

void UncertaintySpec::validate() const {
  require_delta(delta);
  if (epsilon.has_value() == r.has_value()) {
    throw ValidationError("uncertainty spec: supply exactly one of epsilon and r");
  }
  if (epsilon && !(*epsilon >= 0.0)) throw ValidationError("uncertainty spec: epsilon < 0");
  if (r && !(*r >= 0.0 && *r <= 1.0)) throw ValidationError("uncertainty spec: r outside [0,1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("uncertainty spec: alpha outside (0,1]");
  if (!(column_floor >= 0.0)) throw ValidationError("uncertainty spec: negative column floor");
}

ConditionalTable contaminate(const ConditionalTable& nominal, double delta, const Distribution& f0,
                             const Distribution& f1) {
  require_binary(nominal, "contaminate");
  require_delta(delta);
  const std::size_t n = nominal.num_outcomes();
  if (f0.size() != n || f1.size() != n) throw ValidationError("contaminate: alphabet mismatch");
  std::vector<Distribution> rows;
  for (std::size_t g = 0; g < 2; ++g) {
    const Distribution& f = g == 0 ? f0 : f1;
    std::vector<double> m(n);
    for (std::size_t z = 0; z < n; ++z) m[z] = (1.0 - delta) * nominal(g, z) + delta * f[z];
    rows.push_back(Distribution::normalized(std::move(m)));
  }
  return ConditionalTable(std::move(rows));
}

std::optional<Witness> membership_witness(const ConditionalTable& nominal,
                                          const ConditionalTable& candidate, double delta,
                                          double tol) {
  require_binary(nominal, "membership_witness");
  require_binary(candidate, "membership_witness");
  require_delta(delta);
  const std::size_t n = nominal.num_outcomes();
  if (candidate.num_outcomes() != n) throw ValidationError("membership_witness: alphabet mismatch");
  Witness w;
  if (delta == 0.0) {
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t z = 0; z < n; ++z) {
        if (std::abs(candidate(g, z) - nominal(g, z)) > tol) return std::nullopt;
      }
      w[g] = nominal.row(g).vec();
    }
    return w;
  }
  for (std::size_t g = 0; g < 2; ++g) {
    w[g].resize(n);
    for (std::size_t z = 0; z < n; ++z) {
      const double f = (candidate(g, z) - (1.0 - delta) * nominal(g, z)) / delta;
      if (f < -tol) return std::nullopt;
      w[g][z] = f;
    }
  }
  return w;
}

double prop1_delta(const Distribution& p_gn, double min_mass, double pi) {
  if (p_gn.size() != 2) throw ValidationError("prop1_delta: prior must be binary");
  const double pg = p_gn.min();
  if (!(pi >= 0.0 && pi < std::min(pg, min_mass))) {
    throw ValidationError("prop1_delta: crossover must satisfy 0 <= pi < min(p(g*), alpha)");
  }
  return 1.0 - (pg - pi) / ((1.0 - pi) * pg) * (1.0 - pi / min_mass);
}

ConditionalTable noisy_hypothesis(const ConditionalTable& x_given_gn, const Distribution& p_gn,
                                  double pi01, double pi10) {
  require_binary(x_given_gn, "noisy_hypothesis");
  if (p_gn.size() != 2) throw ValidationError("noisy_hypothesis: prior must be binary");
  // channel[g_nominal][g]
  const double ch[2][2] = {{1.0 - pi01, pi01}, {pi10, 1.0 - pi10}};
  std::vector<Distribution> rows;
  for (std::size_t g = 0; g < 2; ++g) {
    const double pg = p_gn[0] * ch[0][g] + p_gn[1] * ch[1][g];
    if (!(pg > 0.0)) throw ValidationError("noisy_hypothesis: induced prior has a zero mass");
    std::vector<double> m(x_given_gn.num_outcomes(), 0.0);
    for (std::size_t gn = 0; gn < 2; ++gn) {
      const double post = p_gn[gn] * ch[gn][g] / pg;
      for (std::size_t x = 0; x < m.size(); ++x) m[x] += post * x_given_gn(gn, x);
    }
    rows.push_back(Distribution::normalized(std::move(m)));
  }
  return ConditionalTable(std::move(rows));
}

MfdResult build_mfd(const ConditionalTable& nominal, double delta, std::uint64_t tie_seed,
                    double tie_tol) {
  require_binary(nominal, "build_mfd");
  require_delta(delta);
  MfdResult out;
  out.tie_seed = tie_seed;
  out.r_nominal = min_avg_type12_error(nominal);
  const LikelihoodRatioProfile lr = likelihood_ratio_profile(nominal, tie_tol);

  Rng rng(tie_seed);
  auto pick = [&rng](const std::vector<std::size_t>& set) {
    std::uniform_int_distribution<std::size_t> d(0, set.size() - 1);
    return set[d(rng)];
  };
  out.z_under = pick(lr.argmin_set);
  std::vector<std::size_t> over = lr.argmax_set;
  if (over.size() > 1) {
    // All ratios tie only for an uninformative nominal; keep the two extremes distinct.
    over.erase(std::remove(over.begin(), over.end(), out.z_under), over.end());
  }
  out.z_over = pick(over);

  if (delta == 0.0) {
    out.cond_mf = nominal;
    out.r_mf = out.r_nominal;
    const double p0u = nominal(0, out.z_under), p1u = nominal(1, out.z_under);
    const double p0o = nominal(0, out.z_over), p1o = nominal(1, out.z_over);
    out.A1 = p1u > 0.0 ? p0u / p1u : std::numeric_limits<double>::infinity();
    out.A2 = p0o > 0.0 ? p1o / p0o : std::numeric_limits<double>::infinity();
    return out;
  }
  if (out.z_under == out.z_over) {
    throw ValidationError("build_mfd: nominal alphabet has a single usable outcome");
  }
  const double p1u = nominal(1, out.z_under);
  const double p0o = nominal(0, out.z_over);
  if (!(p1u > 0.0) || !(p0o > 0.0)) {
    throw ValidationError("build_mfd: degenerate nominal, zero denominator at the extreme ratio");
  }
  const double k = delta / (1.0 - delta);
  out.A1 = (k + nominal(0, out.z_under)) / p1u;
  out.A2 = (k + nominal(1, out.z_over)) / p0o;

  const std::size_t n = nominal.num_outcomes();
  std::vector<double> r0(n), r1(n);
  for (std::size_t z = 0; z < n; ++z) {
    r0[z] = (1.0 - delta) * nominal(0, z) + (z == out.z_under ? delta : 0.0);
    r1[z] = (1.0 - delta) * nominal(1, z) + (z == out.z_over ? delta : 0.0);
  }
  out.cond_mf = ConditionalTable(
      {Distribution::normalized(std::move(r0)), Distribution::normalized(std::move(r1))});
  out.r_mf = min_avg_type12_error(out.cond_mf);
  if (std::abs(out.r_mf - (1.0 - delta) * out.r_nominal) > 1e-10) {
    throw Error("build_mfd: error identity violated (r_mf = " + std::to_string(out.r_mf) +
                ", expected " + std::to_string((1.0 - delta) * out.r_nominal) + ")");
  }
  return out;
}

double compute_c_g(const ConditionalTable& cond, double tie_tol) {
  const LikelihoodRatioProfile lr = likelihood_ratio_profile(cond, tie_tol);
  double under = 0.0;
  double over = 0.0;
  for (std::size_t z : lr.argmin_set) under += cond(0, z);
  for (std::size_t z : lr.argmax_set) over += cond(1, z);
  return std::min(under, over);
}

double theta_zero(double delta) {
  require_delta(delta);
  return 0.5 * (1.0 - delta);
}

double threshold_theta(const UncertaintySpec& spec) {
  spec.validate();
  if (spec.r) return *spec.r * theta_zero(spec.delta);
  const double gain = -std::expm1(-*spec.epsilon);  // 1 - e^{-eps}
  return 0.5 * (1.0 - gain * (1.0 - spec.delta) * spec.alpha * spec.column_floor);
}

double implied_epsilon(double theta, double delta, double alpha, double column_floor) {
  require_delta(delta);
  const double scale = (1.0 - delta) * alpha * column_floor;
  if (!(scale > 0.0)) return std::numeric_limits<double>::infinity();
  const double gain = (1.0 - 2.0 * theta) / scale;
  if (gain <= 0.0) return 0.0;
  if (gain >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::log1p(-gain);
}

double info_privacy_budget(const ConditionalTable& cond, const Distribution& prior) {
  require_binary(cond, "info_privacy_budget");
  if (prior.size() != 2) throw ValidationError("info_privacy_budget: prior must be binary");
  const Distribution pz = output_marginal(cond, prior);
  double eps = 0.0;
  for (std::size_t z = 0; z < pz.size(); ++z) {
    if (!(pz[z] > 0.0)) {
      throw ValidationError("info_privacy_budget: p_Z(" + std::to_string(z) + ") = 0");
    }
    for (std::size_t g = 0; g < 2; ++g) {
      if (!(prior[g] > 0.0)) continue;
      const double p = cond(g, z);
      if (p <= 0.0) return std::numeric_limits<double>::infinity();
      eps = std::max(eps, std::abs(std::log(p / pz[z])));
    }
  }
  return eps;
}

ContaminatedHypothesis sample_contaminated(const ConditionalTable& nominal, double delta,
                                           std::size_t index, std::uint64_t seed,
                                           const Distribution& prior) {
  require_binary(nominal, "sample_contaminated");
  require_delta(delta);
  const std::size_t nz = nominal.num_outcomes();
  auto make = [&](Distribution f0, Distribution f1) {
    return ContaminatedHypothesis{contaminate(nominal, delta, f0, f1), std::move(f0),
                                  std::move(f1), prior};
  };
  if (index < 2 && nz >= 2) {
    const LikelihoodRatioProfile lr = likelihood_ratio_profile(nominal);
    const std::size_t lo = lr.argmin_set.front();
    std::size_t hi = lr.argmax_set.back();
    if (hi == lo) hi = (lo + 1) % nz;
    if (index == 0) return make(Distribution::point_mass(nz, lo), Distribution::point_mass(nz, hi));
    return make(Distribution::point_mass(nz, hi), Distribution::point_mass(nz, lo));
  }
  Rng rng(mix_seed(seed, index));
  std::uniform_int_distribution<std::size_t> atom(0, nz - 1);
  if ((rng() & 1U) == 0U) {
    Distribution f0 = Distribution::point_mass(nz, atom(rng));
    Distribution f1 = Distribution::point_mass(nz, atom(rng));
    return make(std::move(f0), std::move(f1));
  }
  Distribution f0 = Distribution::normalized(sample_dirichlet(rng, nz));
  Distribution f1 = Distribution::normalized(sample_dirichlet(rng, nz));
  return make(std::move(f0), std::move(f1));
}

std::vector<ContaminatedHypothesis> sample_uncertainty_set(const ConditionalTable& nominal,
                                                           double delta, std::size_t n,
                                                           std::uint64_t seed,
                                                           const Distribution& prior) {
  std::vector<ContaminatedHypothesis> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_contaminated(nominal, delta, i, seed, prior));
  return out;
}

}  // namespace privdetect
