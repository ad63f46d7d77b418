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
#include <limits>
#include <random>

#include "privdetect/baselines.hpp"
#include "privdetect/error.hpp"
#include "privdetect/prob.hpp"
#include "support/test_util.hpp"

namespace privdetect {
namespace {

JointModel desk_model(std::uint64_t seed) { return generate_model(3, 8, 0.5, std::nullopt, seed); }

JointModel single_sensor(std::size_t nx, std::size_t nz, std::uint64_t seed) {
  GenerateOptions o;
  o.quant_alphabet = nz;
  o.delta_floor = 0.0;
  return generate_model(1, nx, 0.4, std::nullopt, seed, o);
}

TEST(LocalDp, Examples) {
  const Channel u = local_dp_channel(5, 3, 0.0);
  for (double v : u.entries()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Channel det = local_dp_channel(5, 3, std::numeric_limits<double>::infinity());
  for (std::size_t x = 0; x < 5; ++x) EXPECT_EQ(det(x, x % 3), 1.0);
  const Channel big = local_dp_channel(5, 3, 800.0);
  for (std::size_t x = 0; x < 5; ++x) EXPECT_NEAR(big(x, x % 3), 1.0, 1e-15);
  EXPECT_THROW(local_dp_channel(4, 2, -1.0), ValidationError);
}

TEST(LocalDp, RatioBoundIsTightForEveryPair) {
  for (double eps : {0.1, 0.7, 2.0, 5.0}) {
    for (std::size_t nz : {2U, 3U, 4U}) {
      const Channel q = local_dp_channel(8, nz, eps);
      double worst = 0.0;
      for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t x = 0; x < 8; ++x) {
          for (std::size_t y = 0; y < 8; ++y) worst = std::max(worst, q(x, z) / q(y, z));
        }
      }
      EXPECT_NEAR(worst, std::exp(eps), 1e-12 * std::exp(eps));
      for (std::size_t x = 0; x < 8; ++x) {
        double row = 0.0;
        for (std::size_t z = 0; z < nz; ++z) row += q(x, z);
        EXPECT_NEAR(row, 1.0, 1e-15);
      }
    }
  }
}

TEST(MaximalLeakage, StructureAndLeakage) {
  const JointModel m = single_sensor(4, 4, 3);
  const ConditionalTable xg = m.sensor_x_given_g(0);
  for (double eps : {0.0, 0.1, 0.4, std::log(2.0)}) {
    const CentralizedMapping q = maximal_leakage_channel(m, eps);
    ASSERT_EQ(q.num_z, 4U);
    for (std::size_t x = 0; x < q.num_x; ++x) {
      double row = 0.0;
      for (std::size_t z = 0; z < q.num_z; ++z) row += q.q[x * q.num_z + z];
      EXPECT_NEAR(row, 1.0, 1e-14);
      const bool plus = xg(1, x) >= xg(0, x);
      EXPECT_NEAR(q.q[x * 4 + (plus ? 0 : 1)], std::exp(eps) - 1.0, 1e-15);
      EXPECT_EQ(q.q[x * 4 + (plus ? 1 : 0)], 0.0);
      // Remaining columns are constant down the column.
      for (std::size_t z = 2; z < 4; ++z) EXPECT_EQ(q.q[x * 4 + z], q.q[z]);
    }
    EXPECT_NEAR(maximal_leakage_of(q), eps, 1e-12);

    // Leakage to G: log max_gamma P(gamma(Z) = G) / max_g p_G(g) over all 16 rules.
    const FusionLaw law = push_forward(m.expand(), q);
    const Distribution j = law.joint_zg();
    const Distribution pg = law.p_g();
    double best = 0.0;
    for (unsigned rule = 0; rule < 16; ++rule) {
      double correct = 0.0;
      for (std::size_t z = 0; z < 4; ++z) correct += j[z * 2 + ((rule >> z) & 1U)];
      best = std::max(best, correct);
    }
    EXPECT_LE(std::log(best / pg.max()), eps + 1e-9);
  }
}

TEST(MaximalLeakage, ZeroBudgetIsIndependentAndKlShrinks) {
  const JointModel m = single_sensor(4, 4, 5);
  const BaselineResult r0 = maximal_leakage_mapping(m, 0.0);
  EXPECT_NEAR(r0.error_nominal, m.p_g().min(), 1e-12);
  EXPECT_NEAR(r0.error_h, m.p_h().min(), 1e-12);
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {0.6, 0.4, 0.2, 0.05, 0.0}) {
    const FusionLaw law = push_forward(m.expand(), maximal_leakage_channel(m, eps));
    const ConditionalTable zg = law.z_given_g();
    const double kl = kl_divergence(zg.row(0), zg.row(1));
    EXPECT_LE(kl, previous + 1e-15);
    previous = kl;
  }
  EXPECT_NEAR(previous, 0.0, 1e-15);
}

TEST(MaximalLeakage, RejectsInfeasibleBudgets) {
  EXPECT_THROW(maximal_leakage_channel(single_sensor(4, 4, 1), 0.8), InfeasibleError);
  const JointModel binary = single_sensor(4, 2, 1);
  EXPECT_THROW(maximal_leakage_channel(binary, 0.3), InfeasibleError);
  EXPECT_NO_THROW(maximal_leakage_channel(binary, std::log(2.0)));
}

TEST(AvgLeakage, ZeroBudgetMakesZIndependentOfG) {
  const JointModel m = desk_model(2);
  PbpoConfig cfg;
  cfg.seed = 2;
  const BaselineResult r = optimize_avg_leakage(m, 0.0, cfg);
  EXPECT_LE(r.leakage, 1e-6);
  EXPECT_GE(r.error_nominal, m.p_g().min() - 1e-3);
  EXPECT_THROW(optimize_avg_leakage(m, -0.1, cfg), ValidationError);
}

TEST(AvgLeakage, SlackBudgetMatchesPrivacyFreeRun) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const JointModel m = desk_model(seed);
    PbpoConfig cfg;
    cfg.seed = seed;
    cfg.r = 0.0;
    const PbpoResult free_run = pbpo_optimize(m, cfg);
    const TensorLaw law = m.expand();
    const double i_gx = mutual_information(law.x_given_g(), law.p_g());
    const BaselineResult r = optimize_avg_leakage(m, i_gx, cfg);
    EXPECT_NEAR(r.error_h, free_run.error, 1e-9) << "seed " << seed;
  }
}

TEST(AvgLeakage, BudgetHoldsOnDeskModels) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const JointModel m = desk_model(seed);
    const TensorLaw law = m.expand();
    const double i_gx = mutual_information(law.x_given_g(), law.p_g());
    PbpoConfig cfg;
    cfg.seed = seed;
    for (double frac : {0.05, 0.2, 0.5}) {
      const BaselineResult r = optimize_avg_leakage(m, frac * i_gx, cfg);
      EXPECT_LE(r.leakage, frac * i_gx + 1e-6);
      const auto& mapping = std::get<StochasticMapping>(r.mapping);
      EXPECT_NEAR(average_leakage(push_forward(m, mapping)), r.leakage, 1e-15);
    }
  }
}

TEST(AvgLeakage, MatchesTwoRuleGridOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const JointModel m = single_sensor(3, 2, seed);
    const TensorLaw law = m.expand();
    const double eps = 0.3 * mutual_information(law.x_given_g(), law.p_g());
    PbpoConfig cfg;
    cfg.seed = seed;
    const BaselineResult r = optimize_avg_leakage(m, eps, cfg);
    const auto phis = enumerate_phi(3, 2);
    double best = 1.0;
    for (std::size_t i = 0; i < phis.size(); ++i) {
      for (std::size_t j = i; j < phis.size(); ++j) {
        for (int k = 0; k <= 10000; ++k) {
          const double w = k / 10000.0;
          std::vector<double> q(6, 0.0);
          for (std::size_t x = 0; x < 3; ++x) {
            q[x * 2 + phis[i].table[x]] += w;
            q[x * 2 + phis[j].table[x]] += 1.0 - w;
          }
          const FusionLaw fl = push_forward(m, StochasticMapping({Channel(3, 2, q)}, 0.0));
          if (average_leakage(fl) <= eps) best = std::min(best, bayes_error(fl.p_h(), fl.z_given_h()));
        }
      }
    }
    EXPECT_NEAR(r.error_h, best, 1e-4) << "seed " << seed;
  }
}

TEST(DecomposeChannel, ReconstructsAndIndexesRoundTrip) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nx = 2 + trial % 5;
    const std::size_t nz = 2 + trial % 3;
    std::vector<double> q;
    for (std::size_t x = 0; x < nx; ++x) {
      const auto row = testing::random_distribution(rng, nz, 0.3);
      q.insert(q.end(), row.vec().begin(), row.vec().end());
    }
    const Channel ch(nx, nz, q);
    const auto parts = decompose_channel(ch);
    EXPECT_LE(parts.size(), nx * nz - nx + 1);
    SensorDesign d;
    d.support = parts;
    const Channel back = realize_design(d, nx, nz);
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(back.entries()[i], q[i], 1e-14);
    for (const auto& [index, w] : parts) {
      EXPECT_GT(w, 0.0);
      EXPECT_EQ(phi_index(phi_from_index(index, nx, nz)), index);
    }
  }
}

TEST(EvaluateErrors, NominalAnchorWithoutContamination) {
  const JointModel m = desk_model(1);
  const FusionLaw law = push_forward(m, StochasticMapping::identity(3, 8));
  const FusionErrors e0 = evaluate_errors(law, 0.0);
  EXPECT_EQ(e0.mf, e0.nominal);
  const FusionErrors e1 = evaluate_errors(law, 0.3);
  EXPECT_LE(e1.mf, e1.nominal + 1e-12);
  EXPECT_EQ(e1.h, e0.h);
}

TEST(CalibrateAndCompare, AnchorsRowsAndMatching) {
  const JointModel m = generate_model(3, 8, 0.5, 0.1, 7);
  PbpoConfig cfg;
  cfg.r = 0.7;
  cfg.seed = 7;
  const ComparisonTable t0 = calibrate_and_compare(m, cfg);
  EXPECT_EQ(t0.anchor, Anchor::kNominal);
  ASSERT_EQ(t0.rows.size(), 3U);
  EXPECT_EQ(t0.rows[0].result.metric, BaselineMetric::kInfoPrivacy);
  EXPECT_EQ(t0.rows[1].result.metric, BaselineMetric::kAvgLeakage);
  EXPECT_EQ(t0.rows[2].result.metric, BaselineMetric::kLocalDp);
  EXPECT_NEAR(t0.i_xh_given_g, conditional_mi_xh_given_g(m), 1e-15);
  for (const auto& row : t0.rows) {
    if (!row.matched) continue;
    EXPECT_GE(row.achieved, t0.target - 1e-12);
    EXPECT_LE(row.achieved, t0.target + 1e-3);
    EXPECT_EQ(row.achieved, row.result.error_nominal);
  }

  cfg.delta = 0.54;
  const ComparisonTable t1 = calibrate_and_compare(m, cfg);
  EXPECT_EQ(t1.anchor, Anchor::kMostFavorable);
  ASSERT_EQ(t1.rows.size(), 4U);
  EXPECT_EQ(t1.rows[3].result.metric, BaselineMetric::kMaximalLeakage);
  for (const auto& row : t1.rows) {
    if (row.matched) EXPECT_EQ(row.achieved, row.result.error_mf);
  }
}

}  // namespace
}  // namespace privdetect
