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

#include "privdetect/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "privdetect/error.hpp"
#include "privdetect/lp.hpp"
#include "privdetect/parallel.hpp"

namespace privdetect {

namespace {

void require_uniform_h(const JointModel& model) {
  const Distribution ph = model.p_h();
  if (std::abs(ph[0] - 0.5) > 1e-12) {
    throw ValidationError("bounds: H must have a uniform prior (p_H(0) = " +
                          std::to_string(ph[0]) + ")");
  }
}

// The eight (f1, f2) pairs of the A/B program.
std::array<std::pair<double, double>, 8> pair_set(const BoundCoefficients& c) {
  return {{{c.a[0], c.b[0]},
           {c.b[0], c.a[0]},
           {c.c[0], c.d[0]},
           {c.d[0], c.c[0]},
           {c.a[1], c.b[1]},
           {c.b[1], c.a[1]},
           {c.c[1], c.d[1]},
           {c.d[1], c.c[1]}}};
}

}  // namespace

BoundCoefficients bound_coefficients(const ConditionalTable& x_given_h,
                                     const ConditionalTable& x_given_g, const Distribution& p_g,
                                     double epsilon) {
  const std::size_t n = x_given_h.num_outcomes();
  if (x_given_g.num_outcomes() != n || p_g.size() != 2) {
    throw ValidationError("bound_coefficients: alphabet mismatch");
  }
  if (!(epsilon >= 0.0)) throw ValidationError("bound_coefficients: epsilon must be >= 0");
  BoundCoefficients out;
  const double up = std::exp(epsilon);
  const double down = std::exp(-epsilon);
  for (std::size_t x = 0; x < n; ++x) {
    const bool plus = x_given_h(0, x) - x_given_h(1, x) >= 0.0;
    (plus ? out.i_plus : out.i_minus).push_back(x);
    const double px = x_given_g(0, x) * p_g[0] + x_given_g(1, x) * p_g[1];
    for (std::size_t g = 0; g < 2; ++g) {
      const double pxg = x_given_g(g, x);
      (plus ? out.a : out.b)[g] += pxg - up * px;
      (plus ? out.c : out.d)[g] += down * px - pxg;
    }
  }
  for (std::size_t g = 0; g < 2; ++g) {
    out.m_g = std::max({out.m_g, std::abs(out.a[g] - out.b[g]), std::abs(out.c[g] - out.d[g])});
  }
  return out;
}

BoundCoefficients bound_coefficients(const JointModel& model, double epsilon,
                                     const ContaminatedHypothesis& g, std::size_t cap) {
  const TensorLaw law = model.expand(cap);
  return bound_coefficients(law.x_given_h(), g.cond, g.prior, epsilon);
}

AbSolution solve_ab_program(const BoundCoefficients& coeffs, double total) {
  if (!(total > 0.0)) throw ValidationError("A/B program: total must be positive");
  // With B = total - A each pair reads (f1 - f2) A <= -f2 total.
  double lo = 0.0;
  double hi = total;
  bool constrained = false;
  for (const auto& [f1, f2] : pair_set(coeffs)) {
    const double slope = f1 - f2;
    const double rhs = -f2 * total;
    if (slope > 0.0) {
      const double bound = rhs / slope;
      if (bound < hi) {
        hi = bound;
        constrained = true;
      }
    } else if (slope < 0.0) {
      lo = std::max(lo, rhs / slope);
    } else if (rhs < 0.0) {
      return {};
    }
  }
  if (lo > hi) return {};
  AbSolution out;
  out.feasible = true;
  out.A = hi;
  out.B = total - hi;
  out.constrained = constrained;
  return out;
}

AbSolution solve_ab_program_lp(const BoundCoefficients& coeffs, double total) {
  LinearProgram lp;
  lp.maximize = true;
  lp.objective = {1.0, -1.0};
  for (const auto& [f1, f2] : pair_set(coeffs)) {
    lp.a_ub.push_back({f1, f2});
    lp.b_ub.push_back(0.0);
  }
  lp.a_eq.push_back({1.0, 1.0});
  lp.b_eq.push_back(total);
  const LpSolution sol = solve(lp);
  if (sol.status != LpStatus::kOptimal) return {};
  AbSolution out;
  out.feasible = true;
  out.A = sol.values[0];
  out.B = sol.values[1];
  out.constrained = out.A < total - 1e-12;
  return out;
}

double lower_bound_from_information(double i_xh_given_g, double epsilon) {
  const double v = 0.5 - std::sqrt(std::max(0.0, i_xh_given_g + epsilon) / 2.0);
  return std::clamp(v, 0.0, 0.5);
}

double lower_bound(const JointModel& model, double epsilon, std::size_t cap) {
  require_uniform_h(model);
  return lower_bound_from_information(conditional_mi_xh_given_g(model, cap), epsilon);
}

BoundReport compute_bounds(const JointModel& model, double epsilon, const BoundOptions& options) {
  require_uniform_h(model);
  if (!(epsilon >= 0.0)) throw ValidationError("bounds: epsilon must be >= 0");
  const TensorLaw law = model.expand(options.cap);
  const ConditionalTable xh = law.x_given_h();
  const ConditionalTable xg = law.x_given_g();
  const Distribution pg = law.p_g();

  BoundReport rep;
  rep.epsilon = epsilon;
  rep.i_xh_given_g = conditional_mi_xh_given_g(model, options.cap);
  rep.tv_xh = total_variation(xh.row(0), xh.row(1));
  rep.lower = lower_bound_from_information(rep.i_xh_given_g, epsilon);

  rep.sampled = options.delta > 0.0;
  const std::size_t n = rep.sampled ? std::max<std::size_t>(options.n_samples, 1) : 1;
  rep.n_samples = n;
  const double gain = std::expm1(epsilon);  // e^eps - 1

  std::vector<double> denom(n);
  std::vector<double> ratio(n);
  parallel_for(n, Exec::kParallel, [&](std::size_t i) {
    const ContaminatedHypothesis g =
        rep.sampled ? sample_contaminated(xg, options.delta, i, options.seed, pg)
                    : ContaminatedHypothesis{xg, xg.row(0), xg.row(1), pg};
    const BoundCoefficients c = bound_coefficients(xh, g.cond, g.prior, epsilon);
    denom[i] = std::max(c.m_g, gain);
    const AbSolution ab = solve_ab_program(c, 1.0);
    ratio[i] = ab.feasible ? ab.A - ab.B : 0.0;
  });

  std::size_t arg = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (denom[i] < denom[arg]) arg = i;
  }
  rep.minimizing_sample = arg;
  rep.minimizing_denominator = denom[arg];
  if (gain == 0.0 || rep.tv_xh == 0.0) {
    rep.upper = 0.5;
  } else {
    rep.upper = std::clamp(0.5 - gain * rep.tv_xh / (2.0 * denom[arg]), 0.0, 0.5);
  }
  const double worst = *std::min_element(ratio.begin(), ratio.end());
  rep.upper_constructive = std::clamp(0.5 - 0.5 * rep.tv_xh * std::max(0.0, worst), 0.0, 0.5);
  return rep;
}

double upper_bound(const JointModel& model, double epsilon, const BoundOptions& options) {
  return compute_bounds(model, epsilon, options).upper;
}

}  // namespace privdetect
