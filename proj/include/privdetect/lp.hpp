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

// Dense linear programming: a two-phase tableau simplex with Bland's rule and a
// specialized solver for simplex-constrained programs with one extra inequality.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace privdetect {

/// minimize (or maximize) c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= lower.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<std::vector<double>> a_ub;
  std::vector<double> b_ub;
  std::vector<std::vector<double>> a_eq;
  std::vector<double> b_eq;
  std::vector<double> lower;  // empty means all zeros
  bool maximize = false;

  std::size_t num_vars() const noexcept { return objective.size(); }
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* to_string(LpStatus status) noexcept;

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> values;
  double objective = 0.0;
  std::vector<std::size_t> basis;  // basic column per row (slacks follow the structural columns)
  /// Lagrange multipliers y with c - A_ub'y_ub - A_eq'y_eq >= 0 and y_ub <= 0 for
  /// minimization (both inequalities reversed for maximization).
  std::vector<double> duals_ub;
  std::vector<double> duals_eq;
  std::size_t iterations = 0;
};

struct LpOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 100000;
};

/// Throws ValidationError on dimension mismatch or non-finite data.
LpSolution solve(const LinearProgram& lp, const LpOptions& options = {});

/// Result of min sum nu_i cost_i  s.t. sum nu_i priv_i >= theta, nu in the simplex.
struct WeightsSolution {
  bool feasible = false;
  std::vector<std::pair<std::size_t, double>> support;  // at most two entries, ascending index
  double objective = 0.0;
  double privacy = 0.0;
};

/// Lower-convex-hull solution of the weights program; support size <= 2.
WeightsSolution solve_weights_simplex(std::span<const double> costs,
                                      std::span<const double> privacy_values, double theta_eff);

/// Same program through the general simplex (reference implementation).
WeightsSolution solve_weights_simplex_generic(std::span<const double> costs,
                                              std::span<const double> privacy_values,
                                              double theta_eff);

}  // namespace privdetect
