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
#include <sstream>

#include <nlohmann/json.hpp>

#include "privdetect/error.hpp"
#include "privdetect/pbpo.hpp"
#include "support/test_util.hpp"

namespace privdetect {
namespace {

JointModel desk_model(std::uint64_t seed, double corr = 0.2) {
  return generate_model(3, 8, corr, std::nullopt, seed);
}

// Pushes a model through a single deterministic rule on sensor t.
FusionLaw with_phi(const JointModel& m, const StochasticMapping& q, std::size_t t,
                   const DeterministicMapping& phi) {
  return push_forward(m, q.with_sensor(t, Channel::from_deterministic(phi)));
}

TEST(EnumeratePhi, CountsAndOrder) {
  EXPECT_EQ(enumerate_phi(2, 2).size(), 4U);
  EXPECT_EQ(phi_count(16, 2), 65536U);
  const auto all = enumerate_phi(3, 3);
  EXPECT_EQ(all.size(), 27U);
  EXPECT_EQ(all.front().table, (std::vector<std::uint32_t>{0, 0, 0}));
  EXPECT_EQ(all[1].table, (std::vector<std::uint32_t>{0, 0, 1}));
  EXPECT_EQ(all.back().table, (std::vector<std::uint32_t>{2, 2, 2}));
  EXPECT_THROW(phi_count(21, 2), CapExceededError);
}

TEST(BayesFusionRule, Examples) {
  GenerateOptions opts;
  opts.p_h1 = 0.3;
  const JointModel m = generate_model(2, 3, 0.2, std::nullopt, 4, opts);
  const auto uniform = StochasticMapping::uniform(2, 3, 2);
  const FusionRule flat = bayes_fusion_rule(m, uniform);
  for (auto d : flat.decide) EXPECT_EQ(d, 0);  // P(H=0) = 0.7

  const JointModel one = generate_model(1, 4, 0.2, std::nullopt, 9, opts);
  const auto id = StochasticMapping::identity(1, 4);
  const FusionRule rule = bayes_fusion_rule(one, id);
  const TensorLaw law = one.expand();
  for (std::size_t x = 0; x < 4; ++x) {
    const double h0 = law.joint[x * 4 + 0] + law.joint[x * 4 + 1];
    const double h1 = law.joint[x * 4 + 2] + law.joint[x * 4 + 3];
    EXPECT_EQ(rule.decide[x], h1 > h0 ? 1 : 0);
  }

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Channel> ch;
    for (int t = 0; t < 2; ++t) {
      std::vector<double> q;
      for (int x = 0; x < 3; ++x) {
        for (double v : testing::random_simplex(rng, 2)) q.push_back(v);
      }
      ch.emplace_back(3, 2, q);
    }
    const FusionLaw fl = push_forward(m, StochasticMapping(ch, 0.0));
    EXPECT_NEAR(fusion_error(fl, bayes_fusion_rule(fl)), bayes_error(fl.p_h(), fl.z_given_h()),
                1e-14);
  }
}

TEST(SensorCoefficients, MatchDirectPushForward) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const JointModel factored = generate_model(2 + seed % 2, 3, 0.3, std::nullopt, seed);
    for (const JointModel& m : {factored, JointModel::tensor(factored.expand())}) {
      std::vector<Channel> ch;
      std::mt19937_64 rng(seed);
      for (std::size_t t = 0; t < m.num_sensors(); ++t) {
        std::vector<double> q;
        for (int x = 0; x < 3; ++x) {
          for (double v : testing::random_simplex(rng, 2)) q.push_back(v);
        }
        ch.emplace_back(3, 2, q);
      }
      const StochasticMapping map(ch, 0.0);
      const FusionRule rule = bayes_fusion_rule(m, map);
      for (std::size_t t = 0; t < m.num_sensors(); ++t) {
        const auto co = lp_coefficients_for_sensor(m, map, rule, t);
        ASSERT_EQ(co.cost.size(), 8U);
        for (std::size_t i = 0; i < co.cost.size(); ++i) {
          const FusionLaw law = with_phi(m, map, t, phi_from_index(i, 3, 2));
          EXPECT_NEAR(co.cost[i], fusion_error(law, rule), 1e-14);
          EXPECT_NEAR(co.privacy[i], min_avg_type12_error(law.z_given_g()), 1e-14);
          EXPECT_LE(co.privacy[i], 0.5 + 1e-15);
        }
      }
    }
  }
}

TEST(SensorCoefficients, ConstantPhiEqualsDeletedSensor) {
  const JointModel m = desk_model(1);
  const auto map = StochasticMapping::identity(3, 8).sensors();
  std::vector<Channel> ch;
  for (int t = 0; t < 3; ++t) ch.push_back(Channel::from_deterministic(phi_from_index(37 + t, 8, 2)));
  const StochasticMapping q(ch, 0.0);
  const FusionRule rule = bayes_fusion_rule(m, q);
  const auto co = lp_coefficients_for_sensor(m, q, rule, 1);
  const double deleted =
      min_avg_type12_error(push_forward(m, q.with_sensor(1, Channel::uniform(8, 2))).z_given_g());
  EXPECT_NEAR(co.privacy[0], deleted, 1e-14);
  EXPECT_NEAR(co.privacy[255], deleted, 1e-14);
}

TEST(SensorCoefficients, SingleSensorCostOracle) {
  GenerateOptions opts;
  opts.p_h1 = 0.4;
  const JointModel m = generate_model(1, 4, 0.1, std::nullopt, 2, opts);
  const StochasticMapping q = StochasticMapping::uniform(1, 4, 2);
  const FusionRule rule{{0, 1}};
  const auto co = lp_coefficients_for_sensor(m, q, rule, 0);
  const ConditionalTable xh = m.sensor_x_given_h(0);
  const Distribution ph = m.p_h();
  for (std::size_t i = 0; i < co.cost.size(); ++i) {
    const auto phi = phi_from_index(i, 4, 2);
    double oracle = 0.0;
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t x = 0; x < 4; ++x) {
        if (rule.decide[phi.table[x]] != h) oracle += ph[h] * xh(h, x);
      }
    }
    EXPECT_NEAR(co.cost[i], oracle, 1e-15);
  }
}

TEST(SensorCoefficients, SerialAndParallelIdentical) {
  const JointModel m = generate_model(3, 8, 0.4, std::nullopt, 12);
  const StochasticMapping q = StochasticMapping::uniform(3, 8, 2).with_sensor(
      0, Channel::from_deterministic(phi_from_index(99, 8, 2)));
  const FusionRule rule = bayes_fusion_rule(m, q);
  const auto a = lp_coefficients_for_sensor(m, q, rule, 2, Exec::kSerial);
  const auto b = lp_coefficients_for_sensor(m, q, rule, 2, Exec::kParallel);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.privacy, b.privacy);
}

TEST(Pbpo, ContractsOnDeskModels) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const JointModel m = desk_model(seed);
    PbpoConfig c;
    c.r = 0.5 + 0.05 * static_cast<double>(seed);
    c.delta = seed % 2 == 0 ? 0.0 : 0.54;
    c.seed = seed;
    const PbpoResult res = pbpo_optimize(m, c);
    ASSERT_FALSE(res.trace.iterations.empty());
    EXPECT_LE(res.trace.iterations.size(), 200U);
    double prev = 1.0;
    for (const auto& it : res.trace.iterations) {
      EXPECT_LE(it.objective, prev + 1e-12);
      prev = it.objective;
      EXPECT_GE(it.privacy_slack, -1e-9);
      for (const Channel& q : it.mapping.sensors()) {
        EXPECT_GE(q.min_column_sum(), m.delta_floor() - 1e-12);
      }
    }
    for (std::size_t t = 0; t < 3; ++t) {
      const SensorDesign& d = res.designs[t];
      ASSERT_TRUE(d.from_lp) << "seed " << seed << " sensor " << t;
      EXPECT_LE(d.support.size(), 2U);
      const Channel rebuilt = realize_design(d, 8, 2);
      for (std::size_t i = 0; i < rebuilt.entries().size(); ++i) {
        EXPECT_NEAR(rebuilt.entries()[i], res.mapping.sensor(t).entries()[i], 1e-15);
      }
    }
    const PrivacyReport rep = validate_privacy(m, res.mapping, privacy_spec(m, c));
    EXPECT_TRUE(rep.constraint_met);
    EXPECT_NEAR(rep.r_mf, (1.0 - c.delta) * rep.min_avg_err_nominal, 1e-10);
  }
}

TEST(Pbpo, SeedDeterminism) {
  const JointModel m = desk_model(21);
  PbpoConfig c;
  c.r = 0.8;
  c.delta = 0.3;
  c.seed = 5;
  const PbpoResult a = pbpo_optimize(m, c);
  c.exec = Exec::kSerial;
  const PbpoResult b = pbpo_optimize(m, c);
  ASSERT_EQ(a.trace.iterations.size(), b.trace.iterations.size());
  for (std::size_t i = 0; i < a.trace.iterations.size(); ++i) {
    EXPECT_EQ(a.trace.iterations[i].objective, b.trace.iterations[i].objective);
    EXPECT_EQ(a.trace.iterations[i].rule, b.trace.iterations[i].rule);
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(a.trace.iterations[i].mapping.sensor(t).entries(),
                b.trace.iterations[i].mapping.sensor(t).entries());
    }
  }
}

TEST(Pbpo, ThresholdExtremes) {
  const JointModel m = desk_model(3);
  PbpoConfig c;
  c.r = 1.0;
  const PbpoResult full = pbpo_optimize(m, c);
  EXPECT_NEAR(full.error, m.p_h().min(), 1e-9);
  EXPECT_NEAR(min_avg_type12_error(push_forward(m, full.mapping).z_given_g()), 0.5, 1e-9);

  c.r = 0.0;
  const PbpoResult free = pbpo_optimize(m, c);
  c.r = 0.6;
  const PbpoResult mid = pbpo_optimize(m, c);
  EXPECT_LE(free.error, mid.error + 1e-12);
  EXPECT_LE(mid.error, full.error + 1e-12);
}

// Pairs of rules with a 1e-3 mixing grid, constrained the way the weights program
// constrains them: the mixture of the per-rule privacy values.
TEST(Pbpo, SingleSensorMatchesPairGridOracle) {
  const auto phis = enumerate_phi(3, 2);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    GenerateOptions o;
    o.delta_floor = 0.0;
    const JointModel m = generate_model(1, 3, 0.4, std::nullopt, 40 + seed, o);
    PbpoConfig c;
    c.r = 0.6;
    c.seed = seed;
    const PbpoResult res = pbpo_optimize(m, c);
    std::vector<double> priv;
    for (const auto& phi : phis) {
      priv.push_back(min_avg_type12_error(with_phi(m, res.mapping, 0, phi).z_given_g()));
    }
    double best = 1.0;
    for (std::size_t a = 0; a < phis.size(); ++a) {
      for (std::size_t b = a; b < phis.size(); ++b) {
        for (int k = 0; k <= 1000; ++k) {
          const double w = k / 1000.0;
          if ((1.0 - w) * priv[a] + w * priv[b] < res.trace.theta_eff - 1e-12) continue;
          const Channel q = Channel::from_deterministic(phis[a]).mix(Channel::from_deterministic(phis[b]), w);
          const FusionLaw law = push_forward(m, StochasticMapping({q}, 0.0));
          best = std::min(best, fusion_error(law, bayes_fusion_rule(law)));
        }
      }
    }
    EXPECT_NEAR(res.error, best, 1e-3) << "seed " << seed;
    EXPECT_LE(res.error, best + 1e-9) << "seed " << seed;
  }
}

// Once one sensor's update makes the constraint bind, the constant rule on the
// others sits a rounding error below theta_eff; they must still take a design.
TEST(Pbpo, BindingConstraintStillDesignsEverySensor) {
  const JointModel m = generate_model(3, 8, 0.5, std::nullopt, 449);
  PbpoConfig c;
  c.r = 0.9;
  c.seed = 49;
  const PbpoResult res = pbpo_optimize(m, c);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_TRUE(res.designs[t].from_lp) << "sensor " << t;
    EXPECT_LE(decompose_channel(res.mapping.sensor(t)).size(), 2U) << "sensor " << t;
  }
  EXPECT_GE(res.trace.iterations.back().privacy_slack, -1e-12);
}

TEST(Pbpo, RejectsUnattainableThreshold) {
  const JointModel m = desk_model(3);
  PbpoConfig c;
  c.epsilon = 0.5;
  c.delta = 0.5;  // theta/(1 - delta) > 1/2
  EXPECT_THROW(pbpo_optimize(m, c), InfeasibleError);
  PbpoConfig both;
  both.r = 0.5;
  both.epsilon = 0.5;
  EXPECT_THROW(pbpo_optimize(m, both), ValidationError);
}

TEST(Pbpo, TraceLogIsLineDelimitedJson) {
  const JointModel m = desk_model(4);
  std::ostringstream log;
  PbpoConfig c;
  c.r = 0.7;
  c.log = &log;
  const PbpoResult res = pbpo_optimize(m, c);
  std::istringstream in(log.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto rec = nlohmann::json::parse(line);
    EXPECT_EQ(rec.at("k").get<std::size_t>(), n + 1);
    EXPECT_TRUE(rec.contains("objective"));
    EXPECT_TRUE(rec.contains("privacy_slack"));
    EXPECT_TRUE(rec.contains("wall_seconds"));
    ++n;
  }
  EXPECT_EQ(n, res.trace.iterations.size());
}

TEST(ValidatePrivacy, Examples) {
  const JointModel m = desk_model(6, 0.1);
  UncertaintySpec spec;
  spec.delta = 0.2;
  spec.r = 0.99;
  const PrivacyReport u = validate_privacy(m, StochasticMapping::uniform(3, 8, 2), spec);
  EXPECT_NEAR(u.min_avg_err_nominal, 0.5, 1e-12);
  EXPECT_TRUE(u.constraint_met);

  GenerateOptions opts;
  opts.concentration = 0.2;  // well separated
  const JointModel sharp = generate_model(2, 3, 0.6, std::nullopt, 8, opts);
  const PrivacyReport id = validate_privacy(sharp, StochasticMapping::identity(2, 3), spec);
  EXPECT_FALSE(id.constraint_met);
  EXPECT_EQ(id.constraint_met, id.min_avg_err_nominal >= id.theta_eff - 1e-9);
  EXPECT_GT(id.epsilon_achieved, 0.0);
}

}  // namespace
}  // namespace privdetect
