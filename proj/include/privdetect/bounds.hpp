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

// Upper and lower bounds on the optimal Bayes error for H under an
// information-privacy budget epsilon.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "privdetect/model.hpp"
#include "privdetect/prob.hpp"
#include "privdetect/uncertainty.hpp"

namespace privdetect {

struct BoundCoefficients {
  std::vector<std::size_t> i_plus;   // x with p(x|H=0) >= p(x|H=1)
  std::vector<std::size_t> i_minus;
  std::array<double, 2> a{}, b{}, c{}, d{};
  double m_g = 0.0;
};

/// Sums over I+ / I- of the displayed differences, with p_X(x;G) = sum_g p(x|g)p_G(g).
BoundCoefficients bound_coefficients(const ConditionalTable& x_given_h,
                                     const ConditionalTable& x_given_g, const Distribution& p_g,
                                     double epsilon);
BoundCoefficients bound_coefficients(const JointModel& model, double epsilon,
                                     const ContaminatedHypothesis& g,
                                     std::size_t cap = kDefaultCap);

/// max A - B  s.t.  f1 A + f2 B <= 0 for every (f1, f2) in the eight-pair set,
/// A, B >= 0, A + B = total. Solved as an interval problem in A.
struct AbSolution {
  bool feasible = false;
  double A = 0.0;
  double B = 0.0;
  bool constrained = false;  // false when no pair binds and A = total
};
AbSolution solve_ab_program(const BoundCoefficients& coeffs, double total);
/// The same program through the general simplex.
AbSolution solve_ab_program_lp(const BoundCoefficients& coeffs, double total);

/// 1/2 - sqrt((I(H;X|G) + epsilon)/2), clamped to [0, 1/2].
double lower_bound(const JointModel& model, double epsilon, std::size_t cap = kDefaultCap);
double lower_bound_from_information(double i_xh_given_g, double epsilon);

struct BoundOptions {
  double delta = 0.0;
  std::size_t n_samples = 200;
  std::uint64_t seed = 0;
  std::size_t cap = kDefaultCap;
};

struct BoundReport {
  double epsilon = 0.0;
  double lower = 0.0;
  /// 1/2 - (e^eps - 1) TV / (2 min_G max{m_G, e^eps - 1}), min over sampled G.
  double upper = 0.5;
  /// Error of the two-level construction with A - B from the exact A/B program,
  /// taking the worst sampled G.
  double upper_constructive = 0.5;
  double i_xh_given_g = 0.0;
  double tv_xh = 0.0;
  std::size_t n_samples = 0;
  bool sampled = false;
  std::size_t minimizing_sample = 0;
  double minimizing_denominator = 0.0;
};

/// Requires a uniform H prior; throws ValidationError otherwise.
BoundReport compute_bounds(const JointModel& model, double epsilon, const BoundOptions& options = {});
double upper_bound(const JointModel& model, double epsilon, const BoundOptions& options = {});

}  // namespace privdetect
