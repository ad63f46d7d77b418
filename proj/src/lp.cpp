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

#include "privdetect/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "privdetect/error.hpp"

namespace privdetect {

const char* to_string(LpStatus status) noexcept {
  switch (status) {
    case LpStatus::kOptimal:
      return "optimal";
    case LpStatus::kInfeasible:
      return "infeasible";
    case LpStatus::kUnbounded:
      return "unbounded";
    case LpStatus::kIterationLimit:
      return "iteration_limit";
  }
  return "unknown";
}

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ValidationError(std::string("lp: non-finite ") + what);
}

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : m_(rows), n_(cols), a_(rows * (cols + 1), 0.0), d_(cols + 1, 0.0), basis_(rows) {}

  /// Snapshot of the initial tableau; refactor() rebuilds from it.
  void freeze() { orig_ = a_; }

  // Recomputes B^{-1} [A | b] for the current basis from the snapshot, which
  // discards the rounding accumulated over many pivots. Returns false (and
  // leaves the tableau alone) when the basis matrix is numerically singular.
  bool refactor() {
    const std::size_t w = n_ + 1;
    std::vector<double> bm(m_ * m_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t k = 0; k < m_; ++k) bm[i * m_ + k] = orig_[i * w + basis_[k]];
    }
    std::vector<double> rhs = orig_;
    for (std::size_t col = 0; col < m_; ++col) {
      std::size_t piv = col;
      for (std::size_t i = col + 1; i < m_; ++i) {
        if (std::abs(bm[i * m_ + col]) > std::abs(bm[piv * m_ + col])) piv = i;
      }
      if (std::abs(bm[piv * m_ + col]) < 1e-13) return false;
      if (piv != col) {
        for (std::size_t k = 0; k < m_; ++k) std::swap(bm[piv * m_ + k], bm[col * m_ + k]);
        for (std::size_t j = 0; j < w; ++j) std::swap(rhs[piv * w + j], rhs[col * w + j]);
      }
      const double p = bm[col * m_ + col];
      for (std::size_t k = 0; k < m_; ++k) bm[col * m_ + k] /= p;
      for (std::size_t j = 0; j < w; ++j) rhs[col * w + j] /= p;
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == col) continue;
        const double f = bm[i * m_ + col];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) bm[i * m_ + k] -= f * bm[col * m_ + k];
        for (std::size_t j = 0; j < w; ++j) rhs[i * w + j] -= f * rhs[col * w + j];
      }
    }
    // Row k of B^{-1}[A|b] belongs to basic variable basis_[k].
    a_ = std::move(rhs);
    for (std::size_t k = 0; k < m_; ++k) {
      for (std::size_t k2 = 0; k2 < m_; ++k2) at(k, basis_[k2]) = k == k2 ? 1.0 : 0.0;
    }
    clamp_rhs();
    return true;
  }

  // Rounding-level negative values of basic variables are zero.
  void clamp_rhs() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (rhs(i) < 0.0 && rhs(i) > -1e-9) rhs(i) = 0.0;
    }
  }

  double& at(std::size_t i, std::size_t j) { return a_[i * (n_ + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return a_[i * (n_ + 1) + j]; }
  double& rhs(std::size_t i) { return at(i, n_); }
  double rhs(std::size_t i) const { return at(i, n_); }
  std::vector<double>& reduced() { return d_; }
  std::vector<std::size_t>& basis() { return basis_; }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    double* row = &a_[r * (n_ + 1)];
    for (std::size_t j = 0; j <= n_; ++j) row[j] /= p;
    row[c] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* other = &a_[i * (n_ + 1)];
      const double f = other[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) other[j] -= f * row[j];
      other[c] = 0.0;
    }
    const double f = d_[c];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= n_; ++j) d_[j] -= f * row[j];
      d_[c] = 0.0;
    }
    basis_[r] = c;
  }

  // Sets the reduced-cost row for cost vector `cost` (size cols) given the basis.
  void price(const std::vector<double>& cost) {
    for (std::size_t j = 0; j < n_; ++j) d_[j] = cost[j];
    d_[n_] = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &a_[i * (n_ + 1)];
      for (std::size_t j = 0; j <= n_; ++j) d_[j] -= cb * row[j];
    }
  }

  // Bland's rule: lowest-index entering column, lowest-index leaving basic variable.
  enum class Outcome { kOptimal, kUnbounded, kLimit };
  Outcome run(const std::vector<double>& cost, std::size_t allowed_cols, double tol,
              std::size_t& iterations, std::size_t max_iterations) {
    constexpr std::size_t kRefactorEvery = 50;
    price(cost);
    std::size_t since_refactor = 0;
    while (true) {
      if (since_refactor >= kRefactorEvery) {
        if (refactor()) price(cost);
        since_refactor = 0;
      }
      std::size_t enter = allowed_cols;
      for (std::size_t j = 0; j < allowed_cols; ++j) {
        if (d_[j] < -tol) {
          enter = j;
          break;
        }
      }
      if (enter == allowed_cols) return Outcome::kOptimal;
      if (iterations >= max_iterations) return Outcome::kLimit;
      std::size_t leave = m_;
      double best = std::numeric_limits<double>::infinity();
      // Tiny pivots amplify rounding by 1/a, and rounding-level negative
      // right-hand sides must not turn the step backwards.
      const double pivot_tol = std::max(tol, 1e-9);
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = at(i, enter);
        if (a <= pivot_tol) continue;
        const double ratio = std::max(0.0, rhs(i)) / a;
        const double slack = tol * std::max(1.0, std::abs(best));
        if (leave == m_ || ratio < best - slack) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + slack && basis_[i] < basis_[leave]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave == m_) return Outcome::kUnbounded;
      if (rhs(leave) < 0.0) rhs(leave) = 0.0;
      pivot(leave, enter);
      clamp_rhs();
      ++iterations;
      ++since_refactor;
    }
  }

 private:
  std::size_t m_;
  std::size_t n_;
  std::vector<double> a_;
  std::vector<double> d_;
  std::vector<std::size_t> basis_;
  std::vector<double> orig_;
};

}  // namespace

LpSolution solve(const LinearProgram& lp, const LpOptions& options) {
  const std::size_t n = lp.num_vars();
  const std::size_t m_ub = lp.a_ub.size();
  const std::size_t m_eq = lp.a_eq.size();
  if (lp.b_ub.size() != m_ub || lp.b_eq.size() != m_eq) {
    throw ValidationError("lp: right-hand side size mismatch");
  }
  if (!lp.lower.empty() && lp.lower.size() != n) throw ValidationError("lp: bound size mismatch");
  for (const auto& row : lp.a_ub) {
    if (row.size() != n) throw ValidationError("lp: inequality row has wrong width");
  }
  for (const auto& row : lp.a_eq) {
    if (row.size() != n) throw ValidationError("lp: equality row has wrong width");
  }
  for (double v : lp.objective) check_finite(v, "objective");
  for (double v : lp.b_ub) check_finite(v, "rhs");
  for (double v : lp.b_eq) check_finite(v, "rhs");
  for (double v : lp.lower) check_finite(v, "bound");
  for (const auto& r : lp.a_ub) for (double v : r) check_finite(v, "coefficient");
  for (const auto& r : lp.a_eq) for (double v : r) check_finite(v, "coefficient");

  const std::vector<double> lower = lp.lower.empty() ? std::vector<double>(n, 0.0) : lp.lower;
  const std::size_t m = m_ub + m_eq;
  const std::size_t first_art = n + m_ub;
  const std::size_t cols = first_art + m;

  Tableau t(m, cols);
  std::vector<double> sign(m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const bool ub = i < m_ub;
    const auto& row = ub ? lp.a_ub[i] : lp.a_eq[i - m_ub];
    double b = ub ? lp.b_ub[i] : lp.b_eq[i - m_ub];
    for (std::size_t j = 0; j < n; ++j) b -= row[j] * lower[j];
    sign[i] = b < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = sign[i] * row[j];
    if (ub) t.at(i, n + i) = sign[i];
    t.at(i, first_art + i) = 1.0;
    t.rhs(i) = sign[i] * b;
    t.basis()[i] = first_art + i;
  }

  LpSolution sol;
  std::size_t iterations = 0;

  std::vector<double> phase1(cols, 0.0);
  for (std::size_t j = first_art; j < cols; ++j) phase1[j] = 1.0;
  t.freeze();
  auto outcome = t.run(phase1, first_art, options.tol, iterations, options.max_iterations);
  sol.iterations = iterations;
  if (outcome == Tableau::Outcome::kLimit) {
    sol.status = LpStatus::kIterationLimit;
    return sol;
  }
  double infeas = 0.0;
  double scale = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    scale = std::max(scale, std::abs(t.rhs(i)));
    if (t.basis()[i] >= first_art) infeas += t.rhs(i);
  }
  if (infeas > 1e-9 * scale) {
    sol.status = LpStatus::kInfeasible;
    return sol;
  }
  // Drive zero-level artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (t.basis()[i] < first_art) continue;
    for (std::size_t j = 0; j < first_art; ++j) {
      if (std::abs(t.at(i, j)) > 1e-9) {
        t.pivot(i, j);
        break;
      }
    }
  }

  std::vector<double> cost(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) cost[j] = lp.maximize ? -lp.objective[j] : lp.objective[j];
  outcome = t.run(cost, first_art, options.tol, iterations, options.max_iterations);
  sol.iterations = iterations;
  if (outcome == Tableau::Outcome::kLimit) {
    sol.status = LpStatus::kIterationLimit;
    return sol;
  }
  if (outcome == Tableau::Outcome::kUnbounded) {
    sol.status = LpStatus::kUnbounded;
    return sol;
  }

  if (t.refactor()) {
    // A fresh factorization can expose a reduced cost hidden by rounding.
    outcome = t.run(cost, first_art, options.tol, iterations, options.max_iterations);
    sol.iterations = iterations;
    if (outcome != Tableau::Outcome::kOptimal) {
      sol.status = outcome == Tableau::Outcome::kUnbounded ? LpStatus::kUnbounded
                                                           : LpStatus::kIterationLimit;
      return sol;
    }
  }

  sol.status = LpStatus::kOptimal;
  sol.values = lower;
  for (std::size_t i = 0; i < m; ++i) {
    if (t.basis()[i] < n) sol.values[t.basis()[i]] += std::max(0.0, t.rhs(i));
  }
  sol.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) sol.objective += lp.objective[j] * sol.values[j];
  sol.basis = t.basis();

  // y' = c_B' B^{-1}; B^{-1} sits in the artificial columns.
  std::vector<double> y(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += cost[t.basis()[i]] * t.at(i, first_art + r);
    const double v = sign[r] * acc;
    y[r] = lp.maximize ? -v : v;
  }
  sol.duals_ub.assign(y.begin(), y.begin() + static_cast<long>(m_ub));
  sol.duals_eq.assign(y.begin() + static_cast<long>(m_ub), y.end());
  return sol;
}

// ------------------------------------------------------- weights program

namespace {

void check_weights_input(std::span<const double> costs, std::span<const double> priv) {
  if (costs.size() != priv.size() || costs.empty()) {
    throw ValidationError("weights program: cost/privacy size mismatch or empty");
  }
}

WeightsSolution finish(std::vector<std::pair<std::size_t, double>> support,
                       std::span<const double> costs, std::span<const double> priv) {
  std::sort(support.begin(), support.end());
  WeightsSolution out;
  out.feasible = true;
  for (const auto& [i, w] : support) {
    out.objective += w * costs[i];
    out.privacy += w * priv[i];
  }
  out.support = std::move(support);
  if (out.support.size() > 2) throw Error("weights program: support exceeds two mappings");
  return out;
}

}  // namespace

WeightsSolution solve_weights_simplex(std::span<const double> costs,
                                      std::span<const double> privacy_values, double theta_eff) {
  check_weights_input(costs, privacy_values);
  const std::size_t n = costs.size();

  // Global minimum cost, preferring the most private among ties, then lowest index.
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (costs[i] < costs[best] ||
        (costs[i] == costs[best] && privacy_values[i] > privacy_values[best])) {
      best = i;
    }
  }
  if (privacy_values[best] >= theta_eff) return finish({{best, 1.0}}, costs, privacy_values);

  double max_priv = -std::numeric_limits<double>::infinity();
  for (double p : privacy_values) max_priv = std::max(max_priv, p);
  if (max_priv < theta_eff) return WeightsSolution{};

  // Lower convex hull of (priv, cost) restricted to priv >= priv[best].
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (privacy_values[i] >= privacy_values[best]) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (privacy_values[a] != privacy_values[b]) return privacy_values[a] < privacy_values[b];
    if (costs[a] != costs[b]) return costs[a] < costs[b];
    return a < b;
  });
  std::vector<std::size_t> hull;
  for (std::size_t i : order) {
    if (!hull.empty() && privacy_values[hull.back()] == privacy_values[i]) continue;
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull.back();
      const double cross = (privacy_values[b] - privacy_values[a]) * (costs[i] - costs[a]) -
                           (costs[b] - costs[a]) * (privacy_values[i] - privacy_values[a]);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }
  // hull starts at `best` (lowest cost at the smallest admissible privacy).
  for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
    const std::size_t a = hull[k];
    const std::size_t b = hull[k + 1];
    if (privacy_values[b] < theta_eff) continue;
    if (privacy_values[b] == theta_eff) return finish({{b, 1.0}}, costs, privacy_values);
    const double wa = (privacy_values[b] - theta_eff) / (privacy_values[b] - privacy_values[a]);
    if (wa <= 0.0) return finish({{b, 1.0}}, costs, privacy_values);
    return finish({{a, wa}, {b, 1.0 - wa}}, costs, privacy_values);
  }
  return finish({{hull.back(), 1.0}}, costs, privacy_values);
}

WeightsSolution solve_weights_simplex_generic(std::span<const double> costs,
                                              std::span<const double> privacy_values,
                                              double theta_eff) {
  check_weights_input(costs, privacy_values);
  const std::size_t n = costs.size();
  LinearProgram lp;
  lp.objective.assign(costs.begin(), costs.end());
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) row[i] = -privacy_values[i];
  lp.a_ub.push_back(std::move(row));
  lp.b_ub.push_back(-theta_eff);
  lp.a_eq.push_back(std::vector<double>(n, 1.0));
  lp.b_eq.push_back(1.0);
  const LpSolution sol = solve(lp);
  if (sol.status != LpStatus::kOptimal) return WeightsSolution{};
  std::vector<std::pair<std::size_t, double>> support;
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.values[i] > 1e-12) support.emplace_back(i, sol.values[i]);
  }
  return finish(std::move(support), costs, privacy_values);
}

}  // namespace privdetect
