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

#pragma once

// Finite-alphabet probability primitives: distributions, conditional tables,
// divergences and Bayes errors. Everything here is a pure function of
// immutable values.

#include <cstddef>
#include <span>
#include <vector>

namespace privdetect {

inline constexpr double kNormTol = 1e-12;
inline constexpr double kCompareTol = 1e-9;
inline constexpr double kTieTol = 1e-9;

/// Probability vector over {0, ..., n-1}.
class Distribution {
 public:
  Distribution() = default;
  /// Validates non-negativity and |sum - 1| <= 1e-12.
  explicit Distribution(std::vector<double> masses);

  static Distribution uniform(std::size_t n);
  static Distribution point_mass(std::size_t n, std::size_t at);
  /// Rescales non-negative weights with a positive total.
  static Distribution normalized(std::vector<double> weights);
  /// Wraps the result of an internal computation; only checks finiteness.
  static Distribution unchecked(std::vector<double> masses);

  std::size_t size() const noexcept { return masses_.size(); }
  double operator[](std::size_t i) const { return masses_[i]; }
  std::span<const double> masses() const noexcept { return masses_; }
  const std::vector<double>& vec() const noexcept { return masses_; }
  double min() const;
  double max() const;

 private:
  struct NoCheck {};
  Distribution(std::vector<double> masses, NoCheck) : masses_(std::move(masses)) {}
  std::vector<double> masses_;
};

/// One distribution per conditioning value; all rows share an outcome alphabet.
class ConditionalTable {
 public:
  ConditionalTable() = default;
  explicit ConditionalTable(std::vector<Distribution> rows);

  std::size_t num_conditions() const noexcept { return rows_.size(); }
  std::size_t num_outcomes() const noexcept {
    return rows_.empty() ? 0 : rows_.front().size();
  }
  const Distribution& row(std::size_t c) const { return rows_[c]; }
  double operator()(std::size_t c, std::size_t outcome) const { return rows_[c][outcome]; }
  const std::vector<Distribution>& rows() const noexcept { return rows_; }

 private:
  std::vector<Distribution> rows_;
};

/// Elementwise ratio row(1)/row(0) with set-valued extrema.
struct LikelihoodRatioProfile {
  std::vector<double> ratios;           // +inf where row(0)=0 < row(1); NaN if excluded
  std::vector<std::size_t> argmin_set;  // outcomes attaining the minimum (tie tolerant)
  std::vector<std::size_t> argmax_set;
  std::vector<std::size_t> excluded;    // outcomes with zero mass under both rows
};

double total_variation(const Distribution& p, const Distribution& q);
double kl_divergence(const Distribution& p, const Distribution& q);
double entropy(const Distribution& p);

/// I(A;B) in nats for prior p_A and channel p_{B|A}; 0 log 0 = 0.
double mutual_information(const ConditionalTable& channel, const Distribution& prior);

/// sum_z min(p(0) cond(z|0), p(1) cond(z|1)).
double bayes_error(const Distribution& prior, const ConditionalTable& cond);

/// min over decision rules of the average of Type I and Type II errors,
/// 1/2 (1 - TV(cond(.|0), cond(.|1))).
double min_avg_type12_error(const ConditionalTable& cond);

LikelihoodRatioProfile likelihood_ratio_profile(const ConditionalTable& cond,
                                                double tie_tol = kTieTol);

/// Joint table p(a, b) = prior(a) * channel(b | a), returned as the marginal of B.
Distribution output_marginal(const ConditionalTable& channel, const Distribution& prior);

}  // namespace privdetect
