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

#include "privdetect/asymptotic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "privdetect/error.hpp"
#include "privdetect/lp.hpp"

namespace privdetect {

namespace {

constexpr double kInvPhi = 0.6180339887498949;  // (sqrt 5 - 1) / 2

struct Minimum {
  double x;
  double f;
};

// Golden-section search for the minimum of a unimodal f on [a, b].
Minimum golden_minimize(const std::function<double(double)>& f, double a, double b, double tol) {
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? Minimum{c, fc} : Minimum{d, fd};
}

// Induced conditional u(z|j) of phi, indexed [j * nz + z].
std::vector<double> induced(const ConditionalTable& x_given_j, const DeterministicMapping& phi) {
  std::vector<double> u(2 * phi.nz, 0.0);
  for (std::size_t x = 0; x < phi.nx(); ++x) {
    u[phi.table[x]] += x_given_j(0, x);
    u[phi.nz + phi.table[x]] += x_given_j(1, x);
  }
  return u;
}

double log_sum(const std::vector<double>& u, std::size_t nz, double lambda) {
  double acc = 0.0;
  for (std::size_t z = 0; z < nz; ++z) {
    const double a = u[z];
    const double b = u[nz + z];
    if (a > 0.0 && b > 0.0) acc += std::exp((1.0 - lambda) * std::log(a) + lambda * std::log(b));
  }
  return acc > 0.0 ? std::log(acc) : -kInfiniteExponent;
}

double mixture_log_sum(const std::vector<std::vector<double>>& induced_set,
                       const std::vector<double>& nu, std::size_t nz, double lambda) {
  double acc = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (nu[i] > 0.0) acc += nu[i] * log_sum(induced_set[i], nz, lambda);
  }
  return acc;
}

}  // namespace

double log_chernoff_sum(const Distribution& p0, const Distribution& p1, double lambda) {
  if (p0.size() != p1.size()) throw ValidationError("chernoff: alphabet mismatch");
  double acc = 0.0;
  for (std::size_t x = 0; x < p0.size(); ++x) {
    if (p0[x] > 0.0 && p1[x] > 0.0) {
      acc += std::exp((1.0 - lambda) * std::log(p0[x]) + lambda * std::log(p1[x]));
    }
  }
  return acc > 0.0 ? std::log(acc) : -kInfiniteExponent;
}

ChernoffResult chernoff_information(const Distribution& p0, const Distribution& p1, double tol) {
  if (p0.size() != p1.size()) throw ValidationError("chernoff: alphabet mismatch");
  const Minimum m =
      golden_minimize([&](double l) { return log_chernoff_sum(p0, p1, l); }, 0.0, 1.0, tol);
  if (m.f == -kInfiniteExponent) return {kInfiniteExponent, 0.5};
  return {std::max(0.0, -m.f), m.x};
}

ConditionalTable single_sensor_conditional(const JointModel& model, Hypothesis j) {
  if (model.num_sensors() > 1) {
    if (model.mode() != JointModel::Mode::kFactored || !model.identical_sensors()) {
      throw ValidationError("asymptotic: requires identical, conditionally independent sensors");
    }
  }
  return j == Hypothesis::kH ? model.sensor_x_given_h(0) : model.sensor_x_given_g(0);
}

double mu_value(const ConditionalTable& x_given_j, const DeterministicMapping& phi, double lambda) {
  if (phi.nx() != x_given_j.num_outcomes()) throw ValidationError("mu: alphabet mismatch");
  return log_sum(induced(x_given_j, phi), phi.nz, lambda);
}

std::vector<double> mu_table(const JointModel& model, double lambda, Hypothesis j,
                             std::size_t nz, Exec exec, std::size_t cap) {
  const ConditionalTable cond = single_sensor_conditional(model, j);
  const std::size_t nx = cond.num_outcomes();
  const std::size_t n = checked_power(nz, nx, cap, "deterministic mapping count |Z|^|X|");
  std::vector<double> out(n);
  parallel_for(n, exec, [&](std::size_t i) {
    DeterministicMapping phi;
    phi.nz = nz;
    phi.table.resize(nx);
    std::size_t rem = i;
    for (std::size_t x = nx; x-- > 0;) {
      phi.table[x] = static_cast<std::uint32_t>(rem % nz);
      rem /= nz;
    }
    out[i] = mu_value(cond, phi, lambda);
  });
  return out;
}

std::vector<DeterministicMapping> partition_mappings(std::size_t n, std::size_t k) {
  if (n == 0 || k == 0) throw ValidationError("partition_mappings: empty alphabet");
  std::vector<DeterministicMapping> out;
  std::vector<std::uint32_t> a(n, 0);
  // a[i] <= 1 + max(a[0..i-1]) and every value < k.
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t top) {
    if (i == n) {
      out.push_back(DeterministicMapping{a, k});
      return;
    }
    const std::uint32_t limit = std::min<std::uint32_t>(top + 1, static_cast<std::uint32_t>(k - 1));
    for (std::uint32_t v = 0; v <= limit; ++v) {
      a[i] = v;
      rec(i + 1, std::max(top, v));
    }
  };
  a[0] = 0;
  rec(1, 0);
  return out;
}

ExponentPair exponents_of(const ConditionalTable& x_given_h, const ConditionalTable& x_given_g,
                          const PhiWeights& weights) {
  if (weights.empty()) throw ValidationError("exponents_of: empty randomization");
  auto side = [&](const ConditionalTable& cond, double& value, double& lambda) {
    std::vector<std::vector<double>> u;
    std::vector<double> nu;
    for (const auto& [phi, w] : weights) {
      u.push_back(induced(cond, phi));
      nu.push_back(w);
    }
    const std::size_t nz = weights.front().first.nz;
    const Minimum m = golden_minimize(
        [&](double l) { return mixture_log_sum(u, nu, nz, l); }, 0.0, 1.0, 1e-10);
    value = m.f == -kInfiniteExponent ? kInfiniteExponent : std::max(0.0, -m.f);
    lambda = m.x;
  };
  ExponentPair out;
  side(x_given_h, out.c_h, out.lambda_h);
  side(x_given_g, out.c_g, out.lambda_g);
  return out;
}

ExponentPair exponents_of(const JointModel& model, const PhiWeights& weights) {
  return exponents_of(single_sensor_conditional(model, Hypothesis::kH),
                      single_sensor_conditional(model, Hypothesis::kG), weights);
}

AsymptoticSolution solve_asymptotic(const JointModel& model, double beta,
                                    const AsymptoticOptions& options) {
  if (!(beta >= 0.0)) {
    throw ValidationError("solve_asymptotic: beta must be >= 0 (got " + std::to_string(beta) + ")");
  }
  const ConditionalTable xh = single_sensor_conditional(model, Hypothesis::kH);
  const ConditionalTable xg = single_sensor_conditional(model, Hypothesis::kG);
  const std::size_t nx = xh.num_outcomes();
  const std::size_t nz =
      options.reduce_alphabet ? std::min(model.quant_alphabet(), nx + 1) : model.quant_alphabet();

  // mu depends on phi only through the partition of X it induces.
  const std::vector<DeterministicMapping> phis = partition_mappings(nx, nz);
  const std::size_t n = phis.size();
  std::vector<std::vector<double>> uh(n), ug(n);
  parallel_for(n, options.exec, [&](std::size_t i) {
    uh[i] = induced(xh, phis[i]);
    ug[i] = induced(xg, phis[i]);
  });
  auto column = [&](const std::vector<std::vector<double>>& u, double lambda) {
    std::vector<double> v(n);
    parallel_for(n, options.exec, [&](std::size_t i) { v[i] = log_sum(u[i], nz, lambda); });
    if (std::find(v.begin(), v.end(), -kInfiniteExponent) != v.end()) {
      throw ValidationError("solve_asymptotic: a rule separates the hypotheses perfectly");
    }
    return v;
  };

  // Cuts: sum nu mu_G(phi, l2) >= -beta for each stored l2; shared across lambda_1.
  std::vector<std::vector<double>> cut_rows;
  std::vector<double> cut_lambdas;
  std::size_t cuts_added = 0;

  struct Inner {
    double value = -kInfiniteExponent;
    std::vector<double> nu;
    double lambda_g = 0.5;
  };
  auto add_cut = [&](double l2) {
    cut_rows.push_back(column(ug, l2));
    cut_lambdas.push_back(l2);
  };
  auto inner = [&](double l1) {
    const std::vector<double> cost = column(uh, l1);
    Inner best;
    while (true) {
      LinearProgram lp;
      lp.objective = cost;
      lp.a_eq.push_back(std::vector<double>(n, 1.0));
      lp.b_eq.push_back(1.0);
      for (const auto& row : cut_rows) {
        std::vector<double> neg(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) neg[i] = -row[i];
        lp.a_ub.push_back(std::move(neg));
        lp.b_ub.push_back(beta);
      }
      const LpSolution sol = solve(lp);
      if (sol.status != LpStatus::kOptimal) {
        throw InfeasibleError(std::string("solve_asymptotic: LP ") + to_string(sol.status));
      }
      best.value = -sol.objective;
      best.nu = sol.values;
      const Minimum worst = golden_minimize(
          [&](double l) { return mixture_log_sum(ug, best.nu, nz, l); }, 0.0, 1.0,
          options.lambda_tol);
      best.lambda_g = worst.x;
      if (worst.f >= -beta - options.cut_tol || cuts_added >= options.max_cuts) break;
      add_cut(worst.x);
      ++cuts_added;
    }
    return best;
  };

  add_cut(0.5);
  AsymptoticSolution out;
  out.beta = beta;
  out.nz_used = nz;

  const Minimum golden = golden_minimize([&](double l1) { return -inner(l1).value; }, 0.0, 1.0,
                                         options.lambda_tol);
  double best_l1 = golden.x;
  double best_val = -golden.f;
  // Unimodality check on a coarse grid; fall back to a fine grid if it fails.
  bool bracket_ok = true;
  for (int i = 0; i <= 20; ++i) {
    if (inner(i / 20.0).value > best_val + 1e-9) bracket_ok = false;
  }
  if (!bracket_ok) {
    out.grid_fallback = true;
    const auto steps = static_cast<int>(std::llround(1.0 / options.grid_step));
    for (int i = 0; i <= steps; ++i) {
      const double l1 = i * options.grid_step;
      const double v = inner(l1).value;
      if (v > best_val) {
        best_val = v;
        best_l1 = l1;
      }
    }
    const Minimum local = golden_minimize(
        [&](double l1) { return -inner(l1).value; }, std::max(0.0, best_l1 - options.grid_step),
        std::min(1.0, best_l1 + options.grid_step), options.lambda_tol);
    if (-local.f > best_val) {
      best_val = -local.f;
      best_l1 = local.x;
    }
  }

  const Inner sol = inner(best_l1);
  // Reduce to at most two rules: the single binding cut at lambda_g.
  const std::vector<double> cost = column(uh, best_l1);
  const std::vector<double> priv = column(ug, sol.lambda_g);
  const WeightsSolution pair = solve_weights_simplex(cost, priv, -beta);
  PhiWeights reduced;
  if (pair.feasible) {
    for (const auto& [i, w] : pair.support) reduced.push_back({phis[i], w});
  }
  PhiWeights full;
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.nu[i] > 1e-12) full.push_back({phis[i], sol.nu[i]});
  }
  const ExponentPair full_exp = exponents_of(xh, xg, full);
  out.weights = full;
  ExponentPair chosen = full_exp;
  if (!reduced.empty()) {
    const ExponentPair red_exp = exponents_of(xh, xg, reduced);
    if (red_exp.c_g <= beta + options.cut_tol && red_exp.c_h >= full_exp.c_h - options.cut_tol) {
      out.weights = reduced;
      chosen = red_exp;
    }
  }
  out.c_h = chosen.c_h;
  out.c_g = chosen.c_g;
  out.lambda_h = chosen.lambda_h;
  out.lambda_g = chosen.lambda_g;
  out.cuts = cuts_added + 1;
  return out;
}

double bayes_error_iid(const Distribution& p0, const Distribution& p1, const Distribution& prior,
                       std::size_t s, std::size_t cap) {
  if (p0.size() != p1.size() || prior.size() != 2) {
    throw ValidationError("bayes_error_iid: alphabet mismatch");
  }
  // The error depends on the outcome string only through its type (count
  // vector), so sum over the C(s + k - 1, k - 1) types with multinomial weights.
  const std::size_t k = p0.size();
  double types = 1.0;
  for (std::size_t i = 1; i < k; ++i) {
    types = types * static_cast<double>(s + i) / static_cast<double>(i);
  }
  if (types > static_cast<double>(cap)) {
    throw CapExceededError("bayes_error_iid: number of types exceeds cap");
  }
  auto safe_log = [](double v) { return v > 0.0 ? std::log(v) : -kInfiniteExponent; };
  std::vector<double> l0(k), l1(k);
  for (std::size_t z = 0; z < k; ++z) {
    l0[z] = safe_log(p0[z]);
    l1[z] = safe_log(p1[z]);
  }
  const double lp0 = safe_log(prior[0]);
  const double lp1 = safe_log(prior[1]);
  const double lfs = std::lgamma(static_cast<double>(s) + 1.0);

  std::vector<std::size_t> n(k, 0);
  n[k - 1] = s;
  double err = 0.0;
  while (true) {
    double la = lp0, lb = lp1, lm = lfs;
    for (std::size_t z = 0; z < k; ++z) {
      if (n[z] == 0) continue;
      const double c = static_cast<double>(n[z]);
      la += c * l0[z];
      lb += c * l1[z];
      lm -= std::lgamma(c + 1.0);
    }
    const double lo = std::min(la, lb);
    if (lo > -kInfiniteExponent) err += std::exp(lm + lo);
    // next composition of s into k parts
    std::size_t z = k - 1;
    while (z > 0 && n[z] == 0) --z;
    if (z == 0) break;
    const std::size_t rest = n[z] - 1;
    n[z] = 0;
    ++n[z - 1];
    n[k - 1] = rest;
  }
  return err;
}

double fitted_exponent(const std::vector<std::size_t>& sensors, const std::vector<double>& errors) {
  if (sensors.size() != errors.size() || sensors.size() < 3) {
    throw ValidationError("fitted_exponent: need at least three (s, error) pairs");
  }
  // Normal equations for y = c0 + c1 s + c2 log s.
  std::array<std::array<double, 4>, 3> m{};
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    if (!(errors[i] > 0.0)) throw ValidationError("fitted_exponent: errors must be positive");
    const double s = static_cast<double>(sensors[i]);
    const std::array<double, 3> f{1.0, s, std::log(s)};
    const double y = std::log(errors[i]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += f[r] * f[c];
      m[r][3] += f[r] * y;
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double k = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= k * m[col][c];
    }
  }
  return -m[1][3] / m[1][1];
}

}  // namespace privdetect
