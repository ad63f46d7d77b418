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

// Person-by-person optimization of the per-sensor privacy mappings: the fusion
// rule and each sensor's mapping are updated in turn, the sensor step being a
// linear program over randomizations of deterministic rules.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "privdetect/model.hpp"
#include "privdetect/parallel.hpp"
#include "privdetect/uncertainty.hpp"

namespace privdetect {

/// Decision table over Z^s (mixed radix, sensor 0 most significant).
struct FusionRule {
  std::vector<std::uint8_t> decide;
  bool operator==(const FusionRule&) const = default;
};

/// gamma(z) = argmax_h p(h) p(z|h), ties to h = 0.
FusionRule bayes_fusion_rule(const FusionLaw& law);
FusionRule bayes_fusion_rule(const JointModel& model, const StochasticMapping& mapping,
                             std::size_t z_cap = kDefaultCap);
/// P(gamma(Z) != H).
double fusion_error(const FusionLaw& law, const FusionRule& rule);

/// |Z|^|X|, throwing CapExceededError above `cap`.
std::size_t phi_count(std::size_t nx, std::size_t nz, std::size_t cap = kDefaultCap);
/// The index-th deterministic mapping in lexicographic order (x = 0 most
/// significant); index 0 sends every x to z = 0.
DeterministicMapping phi_from_index(std::size_t index, std::size_t nx, std::size_t nz);
std::vector<DeterministicMapping> enumerate_phi(std::size_t nx, std::size_t nz,
                                                std::size_t cap = kDefaultCap);
/// Inverse of phi_from_index.
std::size_t phi_index(const DeterministicMapping& phi);

/// C[x * |Z| + z] with cost(q_t) = sum_{x,z} C[x][z] q_t(z|x) for the fixed rule.
std::vector<double> sensor_cost_matrix(const JointModel& model, const StochasticMapping& mapping,
                                       const FusionRule& rule, std::size_t t,
                                       std::size_t cap = kDefaultCap);

/// Writes q as a convex combination of deterministic rules (phi index, weight),
/// greedily taking the largest remaining entry of each row.
std::vector<std::pair<std::size_t, double>> decompose_channel(const Channel& q,
                                                              double tol = 1e-15);

struct SensorCoefficients {
  std::vector<double> cost;     // P(gamma(Z) != H) with sensor t replaced by phi
  std::vector<double> privacy;  // min over rules of the average Type I/II error for G
};

/// Coefficients of the sensor-t program for every phi. The serial and
/// parallel paths give bit-identical results.
SensorCoefficients lp_coefficients_for_sensor(const JointModel& model,
                                              const StochasticMapping& mapping,
                                              const FusionRule& rule, std::size_t t,
                                              Exec exec = Exec::kParallel,
                                              std::size_t cap = kDefaultCap);

struct PbpoConfig {
  std::optional<double> r;
  std::optional<double> epsilon;
  double delta = 0.0;
  double xi = 1e-4;
  std::optional<double> noise_scale;  // default 0.05 / |Z|
  std::size_t max_iters = 200;
  std::uint64_t seed = 0;
  std::size_t cap = kDefaultCap;  // bounds |Phi| and |Z|^s
  Exec exec = Exec::kParallel;
  /// Optional newline-delimited JSON log, one record per iteration.
  std::ostream* log = nullptr;

  void validate(std::size_t nz) const;
  /// The checks shared with the baseline optimizers (everything except r / epsilon).
  void validate_loop(std::size_t nz) const;
};

/// Privacy-side view of a model and configuration.
UncertaintySpec privacy_spec(const JointModel& model, const PbpoConfig& config);

struct PbpoIteration {
  std::size_t k = 0;
  double objective = 1.0;  // E^(k)
  FusionRule rule;
  StochasticMapping mapping;
  double privacy_slack = 0.0;  // min_gamma R_G - theta/(1 - delta)
  double wall_seconds = 0.0;
  std::vector<bool> accepted;  // per sensor: LP update kept
};

struct PbpoTrace {
  double theta = 0.5;
  double theta_eff = 0.5;
  std::vector<PbpoIteration> iterations;
  bool converged = false;
};

/// A sensor mapping written as (1 - w) sum_i nu_i phi_i + w * uniform.
struct SensorDesign {
  std::vector<std::pair<std::size_t, double>> support;  // (phi index, nu)
  double uniform_weight = 0.0;
  bool from_lp = false;  // false while the sensor still holds its initial mapping
};

struct PbpoResult {
  StochasticMapping mapping;
  FusionRule rule;
  double error = 0.5;
  PbpoTrace trace;
  std::vector<SensorDesign> designs;
};

/// Throws InfeasibleError when theta/(1 - delta) > 1/2 (no mapping qualifies).
PbpoResult pbpo_optimize(const JointModel& model, const PbpoConfig& config);

/// Rebuilds the channel described by a design.
Channel realize_design(const SensorDesign& design, std::size_t nx, std::size_t nz);

namespace detail {

/// Proposal for sensor t given the current mapping and fusion rule; nullopt
/// keeps the sensor as it is.
using SensorStep = std::function<std::optional<SensorDesign>(
    const StochasticMapping& mapping, const FusionRule& rule, std::size_t t)>;
/// Constraint slack of a fusion-center law; non-negative means satisfied.
using ConstraintSlack = std::function<double(const FusionLaw& law)>;

/// The person-by-person loop shared by every constraint type: perturbed
/// uniform start repaired toward uniform until feasible, then per-sensor
/// proposals accepted when they do not raise the cost and keep slack >= -tol.
/// Uniform mappings must satisfy the constraint.
PbpoResult person_by_person(const JointModel& model, const PbpoConfig& config,
                            const SensorStep& step, const ConstraintSlack& slack,
                            double accept_tol);

/// Smallest w with (1 - w) q + w uniform meeting the column floor.
double floor_weight(const Channel& q, double floor);

}  // namespace detail

struct PrivacyReport {
  double min_avg_err_nominal = 0.5;
  double r_mf = 0.5;
  double theta = 0.5;
  double theta_eff = 0.5;
  double slack = 0.0;
  double epsilon_achieved = 0.0;  // budget of the most-favorable hypothesis
  double epsilon_implied = 0.0;   // inversion of the threshold
  bool constraint_met = false;
};

PrivacyReport validate_privacy(const JointModel& model, const StochasticMapping& mapping,
                               const UncertaintySpec& spec, std::uint64_t tie_seed = 0,
                               std::size_t z_cap = kDefaultCap);

/// info_privacy_budget over the outcomes with positive mass.
double info_privacy_budget_on_support(const ConditionalTable& cond, const Distribution& prior);

}  // namespace privdetect
