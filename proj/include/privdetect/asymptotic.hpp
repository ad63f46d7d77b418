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

// Error exponents for many conditionally i.i.d. sensors: Chernoff information
// and the exponent trade-off between H and G over randomized deterministic rules.

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "privdetect/model.hpp"
#include "privdetect/parallel.hpp"
#include "privdetect/prob.hpp"

namespace privdetect {

inline constexpr double kInfiniteExponent = std::numeric_limits<double>::infinity();

struct ChernoffResult {
  double value = 0.0;   // nats per sensor; kInfiniteExponent for disjoint supports
  double lambda = 0.5;  // minimizer of log sum p0^(1-l) p1^l
};

/// log sum_x p0(x)^(1 - lambda) p1(x)^lambda over the common support.
double log_chernoff_sum(const Distribution& p0, const Distribution& p1, double lambda);

/// Golden-section minimization over [0, 1] to an interval of width `tol`.
ChernoffResult chernoff_information(const Distribution& p0, const Distribution& p1,
                                    double tol = 1e-10);

enum class Hypothesis { kH, kG };

/// Per-sensor conditionals p_{X|J}; requires identical sensors.
ConditionalTable single_sensor_conditional(const JointModel& model, Hypothesis j);

/// mu_J(phi, lambda) = log sum_z u(z|0)^(1 - lambda) u(z|1)^lambda with
/// u(z|j) = sum_{x in phi^-1(z)} p_{X|J}(x|j).
double mu_value(const ConditionalTable& x_given_j, const DeterministicMapping& phi, double lambda);
std::vector<double> mu_table(const JointModel& model, double lambda, Hypothesis j,
                             std::size_t nz, Exec exec = Exec::kParallel,
                             std::size_t cap = kDefaultCap);

/// Restricted-growth strings of length n with at most k blocks: one
/// representative per set partition of X with at most k cells.
std::vector<DeterministicMapping> partition_mappings(std::size_t n, std::size_t k);

struct ExponentPair {
  double c_h = 0.0;
  double c_g = 0.0;
  double lambda_h = 0.5;
  double lambda_g = 0.5;
};

using PhiWeights = std::vector<std::pair<DeterministicMapping, double>>;

/// Exponents of a randomization in which a fraction nu of the sensors uses phi.
ExponentPair exponents_of(const ConditionalTable& x_given_h, const ConditionalTable& x_given_g,
                          const PhiWeights& weights);
ExponentPair exponents_of(const JointModel& model, const PhiWeights& weights);

struct AsymptoticOptions {
  double lambda_tol = 1e-10;  // golden-section tolerance for lambda_1 and lambda_2
  double cut_tol = 1e-8;
  std::size_t max_cuts = 50;
  double grid_step = 1e-3;  // lambda_1 fallback grid
  /// Reduce |Z| to min(|Z|, |X| + 1); extra outcomes add no partitions.
  bool reduce_alphabet = true;
  Exec exec = Exec::kParallel;
};

struct AsymptoticSolution {
  PhiWeights weights;  // support <= 2
  double c_h = 0.0;
  double c_g = 0.0;
  double lambda_h = 0.5;
  double lambda_g = 0.5;
  double beta = 0.0;
  std::size_t nz_used = 0;
  std::size_t cuts = 0;
  bool grid_fallback = false;
  std::size_t support_size() const noexcept { return weights.size(); }
};

/// max C_H(nu) s.t. C_G(nu) <= beta. Throws ValidationError for beta < 0.
AsymptoticSolution solve_asymptotic(const JointModel& model, double beta,
                                    const AsymptoticOptions& options = {});

/// Exact Bayes error of s i.i.d. observations from p0 / p1 by tensoring.
double bayes_error_iid(const Distribution& p0, const Distribution& p1, const Distribution& prior,
                       std::size_t s, std::size_t cap = kDefaultCap);

/// Least-squares fit of log e(s) = c0 - C s + b log s; returns C. The log s term
/// absorbs the polynomial prefactor of the Bayes error.
double fitted_exponent(const std::vector<std::size_t>& sensors, const std::vector<double>& errors);

}  // namespace privdetect
