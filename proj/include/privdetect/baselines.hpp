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

// Comparison privacy mechanisms: average information leakage, maximal leakage
// (high-privacy structure) and local differential privacy, plus the
// calibration that equalizes their private-hypothesis error before comparing.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "privdetect/model.hpp"
#include "privdetect/pbpo.hpp"

namespace privdetect {

enum class BaselineMetric { kInfoPrivacy, kAvgLeakage, kMaximalLeakage, kLocalDp };
const char* to_string(BaselineMetric metric) noexcept;

struct FusionErrors {
  double h = 0.5;
  double nominal = 0.5;  // Bayes error for G under the nominal law
  double mf = 0.5;       // Bayes error for the most-favorable hypothesis
};

/// Bayes errors of a fusion-center law; the MFD is built at `delta`.
FusionErrors evaluate_errors(const FusionLaw& law, double delta, std::uint64_t tie_seed = 0);

struct BaselineResult {
  BaselineMetric metric = BaselineMetric::kInfoPrivacy;
  double parameter = 0.0;  // r or epsilon, eps_A, eps_ML or eps_L
  std::variant<StochasticMapping, CentralizedMapping> mapping;
  double error_h = 0.5;
  double error_nominal = 0.5;
  double error_mf = 0.5;
  double leakage = 0.0;  // I(G;Z) for avg leakage, log sum_z max_x p(z|x) for ML
};

/// Person-by-person optimization with I(G;Z) <= eps_a in place of the
/// information-privacy constraint. Each sensor step minimizes the linear cost
/// over randomizations of deterministic rules with Kelley cutting planes for
/// the convex leakage constraint. config.r / config.epsilon are ignored;
/// config.delta only affects error_mf.
BaselineResult optimize_avg_leakage(const JointModel& model, double eps_a,
                                    const PbpoConfig& config);

/// I(G;Z) in nats at the fusion center.
double average_leakage(const FusionLaw& law);

/// Centralized p_{Z|X} over X^s -> Z^s with two distinguished columns holding
/// e^eps - 1 on I+ = {x: p(x|1) >= p(x|0)} and on the remaining x respectively,
/// and 2 - e^eps spread evenly over the other columns. Throws InfeasibleError
/// when e^eps > 2, or when |Z|^s = 2 and e^eps != 2.
CentralizedMapping maximal_leakage_channel(const JointModel& model, double eps_ml,
                                           std::size_t cap = kDefaultCap);
BaselineResult maximal_leakage_mapping(const JointModel& model, double eps_ml, double delta = 0.0,
                                       std::size_t cap = kDefaultCap);
/// log sum_z max_x p(z|x).
double maximal_leakage_of(const CentralizedMapping& mapping);

/// Randomized response toward bin(x) = x mod |Z| on each sensor.
Channel local_dp_channel(std::size_t nx, std::size_t nz, double eps_l);
StochasticMapping local_dp_mapping(std::size_t s, std::size_t nx, std::size_t nz, double eps_l);
BaselineResult evaluate_local_dp(const JointModel& model, double eps_l, double delta = 0.0,
                                 std::size_t cap = kDefaultCap);

enum class Anchor { kNominal, kMostFavorable };
const char* to_string(Anchor anchor) noexcept;

struct CalibratedRow {
  BaselineResult result;
  double achieved = 0.5;   // anchor error at the chosen parameter
  bool matched = false;    // |achieved - target| <= tolerance
  bool monotone = true;    // no bisection step left the bracket's error range
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  std::size_t evaluations = 0;
};

struct ComparisonTable {
  Anchor anchor = Anchor::kNominal;
  double target = 0.5;  // anchor error of the information-privacy run
  double i_xh_given_g = 0.0;
  std::vector<CalibratedRow> rows;  // info privacy first
};

struct CompareOptions {
  std::optional<Anchor> anchor;  // default: nominal when delta = 0, else most-favorable
  double tolerance = 1e-3;
  std::size_t max_bisections = 40;
  bool include_maximal_leakage = true;  // skipped when delta = 0
};

/// Runs information-privacy PBPO with `config`, then bisects each baseline's
/// parameter until its anchor error matches within the tolerance.
ComparisonTable calibrate_and_compare(const JointModel& model, const PbpoConfig& config,
                                      const CompareOptions& options = {});

}  // namespace privdetect
