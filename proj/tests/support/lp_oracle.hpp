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

// Vertex-enumeration reference for small bounded LPs in the LinearProgram form.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "privdetect/lp.hpp"

namespace privdetect::testing {

// Solves a square system by Gaussian elimination with partial pivoting.
inline std::optional<std::vector<double>> solve_square(std::vector<std::vector<double>> a,
                                                       std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    if (std::abs(a[p][c]) < 1e-10) return std::nullopt;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
};

// Enumerates every vertex of {A_ub x <= b_ub, A_eq x = b_eq, x >= 0}; the polytope must be
// bounded for the optimum to be a vertex.
inline OracleResult vertex_enumeration(const LinearProgram& lp, double feas_tol = 1e-9) {
  const std::size_t n = lp.num_vars();
  std::vector<std::vector<double>> rows = lp.a_ub;
  std::vector<double> rhs = lp.b_ub;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> r(n, 0.0);
    r[j] = -1.0;
    rows.push_back(r);
    rhs.push_back(0.0);
  }
  const std::size_t m_eq = lp.a_eq.size();
  if (m_eq > n) return {};
  const std::size_t need = n - m_eq;
  const std::size_t total = rows.size();
  OracleResult best;
  best.objective = lp.maximize ? -std::numeric_limits<double>::infinity()
                               : std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(need);
  for (std::size_t i = 0; i < need; ++i) pick[i] = i;
  auto evaluate = [&] {
    std::vector<std::vector<double>> a = lp.a_eq;
    std::vector<double> b = lp.b_eq;
    for (std::size_t i : pick) {
      a.push_back(rows[i]);
      b.push_back(rhs[i]);
    }
    const auto x = solve_square(a, b);
    if (!x) return;
    for (std::size_t i = 0; i < total; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j) v += rows[i][j] * (*x)[j];
      if (v > rhs[i] + feas_tol * std::max(1.0, std::abs(rhs[i]))) return;
    }
    for (std::size_t i = 0; i < m_eq; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j) v += lp.a_eq[i][j] * (*x)[j];
      if (std::abs(v - lp.b_eq[i]) > feas_tol * std::max(1.0, std::abs(lp.b_eq[i]))) return;
    }
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) obj += lp.objective[j] * (*x)[j];
    best.feasible = true;
    best.objective = lp.maximize ? std::max(best.objective, obj) : std::min(best.objective, obj);
  };
  if (need == 0) {
    evaluate();
    return best;
  }
  while (true) {
    evaluate();
    std::size_t i = need;
    while (i > 0 && pick[i - 1] == total - need + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t k = i; k < need; ++k) pick[k] = pick[k - 1] + 1;
  }
  return best;
}

// Random bounded LP: the last inequality row caps sum(x).
inline LinearProgram random_bounded_lp(std::mt19937_64& rng, std::size_t n, std::size_t m_ub,
                                       bool with_equality) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<int> small(-3, 3);
  std::bernoulli_distribution integral(0.3);
  auto draw = [&] { return integral(rng) ? static_cast<double>(small(rng)) : coef(rng); };
  LinearProgram lp;
  lp.maximize = (rng() & 1U) != 0U;
  for (std::size_t j = 0; j < n; ++j) lp.objective.push_back(draw());
  for (std::size_t i = 0; i + 1 < m_ub; ++i) {
    std::vector<double> row(n);
    for (double& v : row) v = draw();
    lp.a_ub.push_back(row);
    lp.b_ub.push_back(coef(rng) + 0.3);
  }
  lp.a_ub.push_back(std::vector<double>(n, 1.0));
  lp.b_ub.push_back(1.0 + 4.0 * std::abs(coef(rng)));
  if (with_equality) {
    std::vector<double> row(n);
    for (double& v : row) v = std::abs(draw()) + 0.1;
    lp.a_eq.push_back(row);
    lp.b_eq.push_back(std::abs(coef(rng)));
  }
  return lp;
}

}  // namespace privdetect::testing
