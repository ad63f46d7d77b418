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

#include "privdetect/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "privdetect/error.hpp"

namespace privdetect {

namespace {

void require_binary(const ConditionalTable& cond, const char* op) {
  if (cond.num_conditions() != 2) {
    throw ValidationError(std::string(op) + ": conditioning alphabet must be binary, got " +
                          std::to_string(cond.num_conditions()));
  }
}

void require_same_alphabet(const Distribution& p, const Distribution& q, const char* op) {
  if (p.size() != q.size()) {
    throw ValidationError(std::string(op) + ": alphabet mismatch (" + std::to_string(p.size()) +
                          " vs " + std::to_string(q.size()) + ")");
  }
}

}  // namespace

Distribution::Distribution(std::vector<double> masses) : masses_(std::move(masses)) {
  if (masses_.empty()) throw ValidationError("distribution: empty alphabet");
  double total = 0.0;
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    const double m = masses_[i];
    if (!std::isfinite(m) || m < 0.0) {
      throw ValidationError("distribution: mass[" + std::to_string(i) +
                            "] = " + std::to_string(m) + " is negative or not finite");
    }
    total += m;
  }
  if (std::abs(total - 1.0) > kNormTol) {
    throw ValidationError("distribution: masses sum to " + std::to_string(total));
  }
}

Distribution Distribution::uniform(std::size_t n) {
  if (n == 0) throw ValidationError("distribution: empty alphabet");
  return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)), NoCheck{});
}

Distribution Distribution::point_mass(std::size_t n, std::size_t at) {
  if (at >= n) throw ValidationError("distribution: point mass outside alphabet");
  std::vector<double> m(n, 0.0);
  m[at] = 1.0;
  return Distribution(std::move(m), NoCheck{});
}

Distribution Distribution::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("distribution: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("distribution: weights sum to zero");
  for (double& w : weights) w /= total;
  return Distribution(std::move(weights), NoCheck{});
}

Distribution Distribution::unchecked(std::vector<double> masses) {
  for (double m : masses) {
    if (!std::isfinite(m)) throw ValidationError("distribution: non-finite mass");
  }
  return Distribution(std::move(masses), NoCheck{});
}

double Distribution::min() const { return *std::min_element(masses_.begin(), masses_.end()); }
double Distribution::max() const { return *std::max_element(masses_.begin(), masses_.end()); }

ConditionalTable::ConditionalTable(std::vector<Distribution> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw ValidationError("conditional table: no rows");
  for (const auto& r : rows_) {
    if (r.size() != rows_.front().size()) {
      throw ValidationError("conditional table: rows have different alphabets");
    }
  }
}

double total_variation(const Distribution& p, const Distribution& q) {
  require_same_alphabet(p, q, "total_variation");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * acc);
}

double kl_divergence(const Distribution& p, const Distribution& q) {
  require_same_alphabet(p, q, "kl_divergence");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, acc);
}

double entropy(const Distribution& p) {
  double acc = 0.0;
  for (double m : p.masses()) {
    if (m > 0.0) acc -= m * std::log(m);
  }
  return acc;
}

Distribution output_marginal(const ConditionalTable& channel, const Distribution& prior) {
  if (channel.num_conditions() != prior.size()) {
    throw ValidationError("output_marginal: prior/channel size mismatch");
  }
  std::vector<double> out(channel.num_outcomes(), 0.0);
  for (std::size_t a = 0; a < prior.size(); ++a) {
    for (std::size_t b = 0; b < out.size(); ++b) out[b] += prior[a] * channel(a, b);
  }
  return Distribution::unchecked(std::move(out));
}

double mutual_information(const ConditionalTable& channel, const Distribution& prior) {
  const Distribution marginal = output_marginal(channel, prior);
  double acc = 0.0;
  for (std::size_t a = 0; a < prior.size(); ++a) {
    if (prior[a] <= 0.0) continue;
    for (std::size_t b = 0; b < marginal.size(); ++b) {
      const double c = channel(a, b);
      if (c <= 0.0) continue;
      acc += prior[a] * c * std::log(c / marginal[b]);
    }
  }
  return std::max(0.0, acc);
}

double bayes_error(const Distribution& prior, const ConditionalTable& cond) {
  require_binary(cond, "bayes_error");
  if (prior.size() != 2) throw ValidationError("bayes_error: prior must be binary");
  double acc = 0.0;
  for (std::size_t z = 0; z < cond.num_outcomes(); ++z) {
    acc += std::min(prior[0] * cond(0, z), prior[1] * cond(1, z));
  }
  return acc;
}

double min_avg_type12_error(const ConditionalTable& cond) {
  require_binary(cond, "min_avg_type12_error");
  return 0.5 * (1.0 - total_variation(cond.row(0), cond.row(1)));
}

LikelihoodRatioProfile likelihood_ratio_profile(const ConditionalTable& cond, double tie_tol) {
  require_binary(cond, "likelihood_ratio_profile");
  const double inf = std::numeric_limits<double>::infinity();
  LikelihoodRatioProfile out;
  const std::size_t n = cond.num_outcomes();
  out.ratios.assign(n, std::numeric_limits<double>::quiet_NaN());

  double lo = inf;
  double hi = -inf;
  for (std::size_t z = 0; z < n; ++z) {
    const double p0 = cond(0, z);
    const double p1 = cond(1, z);
    if (p0 <= 0.0 && p1 <= 0.0) {
      out.excluded.push_back(z);
      continue;
    }
    const double r = p0 > 0.0 ? p1 / p0 : inf;
    out.ratios[z] = r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (out.excluded.size() == n) {
    throw ValidationError("likelihood_ratio_profile: both rows vanish everywhere");
  }

  auto near = [tie_tol](double r, double ref) {
    if (std::isinf(ref) || std::isinf(r)) return r == ref;
    return std::abs(r - ref) <= tie_tol * std::max(1.0, std::abs(ref));
  };
  for (std::size_t z = 0; z < n; ++z) {
    const double r = out.ratios[z];
    if (std::isnan(r)) continue;
    if (near(r, lo)) out.argmin_set.push_back(z);
    if (near(r, hi)) out.argmax_set.push_back(z);
  }
  return out;
}

}  // namespace privdetect
