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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "privdetect/asymptotic.hpp"
#include "privdetect/error.hpp"
#include "privdetect/pbpo.hpp"
#include "support/test_util.hpp"

namespace privdetect {
namespace {

JointModel iid_model(std::size_t nx, std::size_t nz, double corr, std::uint64_t seed) {
  GenerateOptions o;
  o.quant_alphabet = nz;
  return generate_model(2, nx, corr, std::nullopt, seed, o);
}

TEST(Chernoff, Examples) {
  const Distribution p({0.7, 0.3});
  EXPECT_NEAR(chernoff_information(p, p).value, 0.0, 1e-15);
  EXPECT_EQ(chernoff_information(Distribution({1.0, 0.0}), Distribution({0.0, 1.0})).value,
            kInfiniteExponent);
  const auto c = chernoff_information(p, Distribution({0.3, 0.7}));
  EXPECT_NEAR(c.lambda, 0.5, 1e-6);  // objective is flat near the minimizer
  EXPECT_NEAR(c.value, -std::log(2.0 * std::sqrt(0.21)), 1e-12);
  EXPECT_NEAR(c.value, 0.0872, 1e-4);
}

TEST(Chernoff, LogSumIsConvex) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = testing::random_distribution(rng, 2 + trial % 6);
    const auto q = testing::random_distribution(rng, p.size());
    const double a = u(rng);
    const double b = u(rng);
    const double mid = log_chernoff_sum(p, q, 0.5 * (a + b));
    EXPECT_LE(mid, 0.5 * (log_chernoff_sum(p, q, a) + log_chernoff_sum(p, q, b)) + 1e-12);
  }
}

TEST(Chernoff, MinimizerMatchesGrid) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = testing::random_distribution(rng, 4);
    const auto q = testing::random_distribution(rng, 4);
    double best = 0.0;
    for (int i = 0; i <= 10000; ++i) best = std::min(best, log_chernoff_sum(p, q, i * 1e-4));
    EXPECT_NEAR(chernoff_information(p, q).value, -best, 1e-8);
  }
}

TEST(MuTable, Examples) {
  const JointModel m = iid_model(3, 2, 0.3, 4);
  const ConditionalTable xh = single_sensor_conditional(m, Hypothesis::kH);
  const auto mu = mu_table(m, 0.3, Hypothesis::kH, 2);
  ASSERT_EQ(mu.size(), 8U);
  EXPECT_NEAR(mu[0], 0.0, 1e-15);  // constant rule
  EXPECT_NEAR(mu[7], 0.0, 1e-15);

  DeterministicMapping id{{0, 1, 2}, 3};
  EXPECT_NEAR(mu_value(xh, id, 0.3), log_chernoff_sum(xh.row(0), xh.row(1), 0.3), 1e-15);

  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto phi = phi_from_index(i, 3, 2);
    std::vector<double> u0(2, 0.0), u1(2, 0.0);
    for (std::size_t x = 0; x < 3; ++x) {
      u0[phi.table[x]] += xh(0, x);
      u1[phi.table[x]] += xh(1, x);
    }
    EXPECT_NEAR(mu[i], log_chernoff_sum(Distribution(u0), Distribution(u1), 0.3), 1e-14);
  }
}

TEST(Partitions, BellNumbers) {
  EXPECT_EQ(partition_mappings(1, 3).size(), 1U);
  EXPECT_EQ(partition_mappings(3, 3).size(), 5U);
  EXPECT_EQ(partition_mappings(4, 4).size(), 15U);
  EXPECT_EQ(partition_mappings(4, 9).size(), 15U);
  EXPECT_EQ(partition_mappings(4, 2).size(), 8U);  // S(4,1) + S(4,2)
  EXPECT_EQ(partition_mappings(5, 5).size(), 52U);
}

TEST(SolveAsymptotic, SlackConstraintGivesSingleRule) {
  const JointModel m = iid_model(4, 5, 0.3, 1);
  const ConditionalTable xh = single_sensor_conditional(m, Hypothesis::kH);
  const ConditionalTable xg = single_sensor_conditional(m, Hypothesis::kG);
  const double beta = chernoff_information(xg.row(0), xg.row(1)).value + 0.01;
  const AsymptoticSolution sol = solve_asymptotic(m, beta);
  ASSERT_EQ(sol.support_size(), 1U);
  EXPECT_NEAR(sol.c_h, chernoff_information(xh.row(0), xh.row(1)).value, 1e-9);
  EXPECT_EQ(sol.nz_used, 5U);
}

TEST(SolveAsymptotic, ZeroRateForcesUninformativeRules) {
  const JointModel m = iid_model(4, 2, 0.3, 2);
  const AsymptoticSolution sol = solve_asymptotic(m, 0.0);
  EXPECT_LE(sol.c_g, 1e-8);
  const ConditionalTable xg = single_sensor_conditional(m, Hypothesis::kG);
  for (const auto& [phi, w] : sol.weights) {
    std::vector<double> u0(phi.nz, 0.0), u1(phi.nz, 0.0);
    for (std::size_t x = 0; x < phi.nx(); ++x) {
      u0[phi.table[x]] += xg(0, x);
      u1[phi.table[x]] += xg(1, x);
    }
    for (std::size_t z = 0; z < phi.nz; ++z) EXPECT_NEAR(u0[z], u1[z], 1e-6);
  }
  EXPECT_THROW(solve_asymptotic(m, -0.1), ValidationError);
}

TEST(SolveAsymptotic, MatchesPairGridOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const JointModel m = iid_model(3, 2, 0.4, 20 + seed);
    const ConditionalTable xh = single_sensor_conditional(m, Hypothesis::kH);
    const ConditionalTable xg = single_sensor_conditional(m, Hypothesis::kG);
    const double beta = 0.4 * chernoff_information(xg.row(0), xg.row(1)).value;
    const AsymptoticSolution sol = solve_asymptotic(m, beta);
    EXPECT_LE(sol.support_size(), 2U);
    EXPECT_LE(sol.c_g, beta + 1e-8);
    const auto phis = enumerate_phi(3, 2);
    double best = 0.0;
    for (std::size_t i = 0; i < phis.size(); ++i) {
      for (std::size_t j = i; j < phis.size(); ++j) {
        for (int k = 0; k <= 200; ++k) {
          const double w = k / 200.0;
          const auto e = exponents_of(xh, xg, {{phis[i], w}, {phis[j], 1.0 - w}});
          if (e.c_g <= beta) best = std::max(best, e.c_h);
        }
      }
    }
    EXPECT_GE(sol.c_h, best - 1e-9);
    EXPECT_LE(sol.c_h, best + 1e-3);
  }
}

TEST(SolveAsymptotic, InvariantToLargerAlphabets) {
  const JointModel base = iid_model(3, 4, 0.5, 6);
  const ConditionalTable xg = single_sensor_conditional(base, Hypothesis::kG);
  const double beta = 0.3 * chernoff_information(xg.row(0), xg.row(1)).value;
  AsymptoticOptions full;
  full.reduce_alphabet = false;
  const double ref = solve_asymptotic(base, beta, full).c_h;
  for (std::size_t nz : {5U, 7U}) {
    EXPECT_NEAR(solve_asymptotic(base.with_design(nz, std::nullopt), beta, full).c_h, ref, 1e-6);
  }
}

TEST(Exponents, FiniteSensorSlope) {
  const Distribution p0({0.6, 0.3, 0.1}), p1({0.2, 0.3, 0.5});
  const std::vector<std::size_t> sensors{5, 10, 15, 20};
  std::vector<double> errors;
  for (std::size_t s : sensors) errors.push_back(bayes_error_iid(p0, p1, Distribution::uniform(2), s));
  for (std::size_t i = 1; i < errors.size(); ++i) EXPECT_LT(errors[i], errors[i - 1]);
  const double c = chernoff_information(p0, p1).value;
  EXPECT_NEAR(fitted_exponent(sensors, errors), c, 0.1 * c);
}

TEST(Exponents, BayesErrorIidSmallCases) {
  const Distribution p0({0.7, 0.3}), p1({0.4, 0.6});
  EXPECT_NEAR(bayes_error_iid(p0, p1, Distribution::uniform(2), 1), 0.35, 1e-15);
  EXPECT_NEAR(bayes_error_iid(p0, p1, Distribution::uniform(2), 0), 0.5, 1e-15);
  // s = 2: outcomes 00, 01, 10, 11.
  const double e2 = 0.5 * (std::min(0.49, 0.16) + 2 * std::min(0.21, 0.24) + std::min(0.09, 0.36));
  EXPECT_NEAR(bayes_error_iid(p0, p1, Distribution::uniform(2), 2), e2, 1e-15);
}

TEST(Exponents, TypeSumMatchesProductEnumeration) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + trial % 3;
    const std::size_t s = 1 + trial % 5;
    const auto p0 = testing::random_distribution(rng, k, 0.2);
    const auto p1 = testing::random_distribution(rng, k, 0.2);
    const auto prior = testing::random_distribution(rng, 2);
    std::vector<double> a{prior[0]}, b{prior[1]};
    for (std::size_t t = 0; t < s; ++t) {
      std::vector<double> na, nb;
      for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t z = 0; z < k; ++z) {
          na.push_back(a[i] * p0[z]);
          nb.push_back(b[i] * p1[z]);
        }
      }
      a.swap(na);
      b.swap(nb);
    }
    double brute = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) brute += std::min(a[i], b[i]);
    EXPECT_NEAR(bayes_error_iid(p0, p1, prior, s), brute, 1e-13);
  }
}

}  // namespace
}  // namespace privdetect
