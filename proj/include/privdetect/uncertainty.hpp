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

// Contamination uncertainty sets around the nominal private hypothesis, the
// most-favorable distribution, and the detection-error thresholds that stand in
// for the information-privacy budget.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "privdetect/prob.hpp"

namespace privdetect {

struct UncertaintySpec {
  double delta = 0.0;
  double alpha = 1.0;  // min_{x,g} p_{X|G}(x|g)
  /// Floor on the column sums of the full mapping p_{Z|X}; for a product of
  /// per-sensor mappings with floor D this is D^s.
  double column_floor = 1.0;
  std::optional<double> epsilon;
  std::optional<double> r;

  void validate() const;
};

struct MfdResult {
  ConditionalTable cond_mf;
  std::size_t z_under = 0;
  std::size_t z_over = 0;
  double A1 = 1.0;
  double A2 = 1.0;
  double r_nominal = 0.5;
  double r_mf = 0.5;
  std::uint64_t tie_seed = 0;
};

struct ContaminatedHypothesis {
  ConditionalTable cond;
  Distribution f0;
  Distribution f1;
  Distribution prior;
};

using Witness = std::array<std::vector<double>, 2>;

/// (1 - delta) * nominal(.|g) + delta * f_g for both rows.
ConditionalTable contaminate(const ConditionalTable& nominal, double delta, const Distribution& f0,
                             const Distribution& f1);

/// Recovers the contaminants f_g, or nullopt when the candidate lies outside the set.
/// Entries down to -tol are tolerated and returned unclamped.
std::optional<Witness> membership_witness(const ConditionalTable& nominal,
                                          const ConditionalTable& candidate, double delta,
                                          double tol = kNormTol);

/// Contamination level that contains every binary-symmetric-channel relabeling of
/// the nominal hypothesis with crossovers at most pi.
double prop1_delta(const Distribution& p_gn, double min_mass, double pi);

/// Observation law p_{X|G} of G obtained by passing G through a binary channel with
/// P(G=1|G°=0) = pi01 and P(G=0|G°=1) = pi10; X depends on G only through G°.
ConditionalTable noisy_hypothesis(const ConditionalTable& x_given_gn, const Distribution& p_gn,
                                  double pi01, double pi10);

MfdResult build_mfd(const ConditionalTable& nominal, double delta, std::uint64_t tie_seed = 0,
                    double tie_tol = kTieTol);

/// min{ P(Z in argmin l | G=0), P(Z in argmax l | G=1) } with l = p(.|1)/p(.|0).
double compute_c_g(const ConditionalTable& cond, double tie_tol = kTieTol);

/// theta_0 = (1 - delta)/2, the error of an uninformative mapping under the MFD.
double theta_zero(double delta);

/// Threshold on the nominal-scaled detection error; see UncertaintySpec.
double threshold_theta(const UncertaintySpec& spec);

/// Largest epsilon whose threshold equals theta; +inf when theta cannot be
/// produced by any finite budget.
double implied_epsilon(double theta, double delta, double alpha, double column_floor);

/// Smallest epsilon with |log p(z|g)/p(z)| <= epsilon for all (g, z).
double info_privacy_budget(const ConditionalTable& cond, const Distribution& prior);

/// The index-th member of the sampled family: index 0 and 1 are the two point-mass
/// extremes, later indices draw from `mix_seed(seed, index)`.
ContaminatedHypothesis sample_contaminated(const ConditionalTable& nominal, double delta,
                                           std::size_t index, std::uint64_t seed,
                                           const Distribution& prior = Distribution::uniform(2));

/// n hypotheses from the uncertainty set: the two point-mass extremes first, then
/// a mix of vertex and simplex-uniform contaminants.
std::vector<ContaminatedHypothesis> sample_uncertainty_set(const ConditionalTable& nominal,
                                                           double delta, std::size_t n,
                                                           std::uint64_t seed,
                                                           const Distribution& prior =
                                                               Distribution::uniform(2));

}  // namespace privdetect
