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

// Joint law of the sensor observations and the two binary hypotheses, the
// per-sensor privacy mappings, and the push-forward to fusion-center laws.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "privdetect/prob.hpp"

namespace privdetect {

inline constexpr std::size_t kDefaultCap = std::size_t{1} << 20;

/// Position of (h, g) in every 4-vector indexed by the hypothesis pair.
constexpr std::size_t hg_index(std::size_t h, std::size_t g) noexcept { return 2 * h + g; }

/// base^exp, throwing CapExceededError when the result exceeds `cap`.
std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap, const char* what);

/// Deterministic per-sensor rule x -> z.
struct DeterministicMapping {
  std::vector<std::uint32_t> table;
  std::size_t nz = 0;

  std::size_t nx() const noexcept { return table.size(); }
  bool operator==(const DeterministicMapping&) const = default;
};

/// Row-stochastic q(z|x) of one sensor, stored row-major.
class Channel {
 public:
  Channel() = default;
  Channel(std::size_t nx, std::size_t nz, std::vector<double> entries);

  static Channel uniform(std::size_t nx, std::size_t nz);
  static Channel identity(std::size_t n);
  static Channel from_deterministic(const DeterministicMapping& phi);

  std::size_t nx() const noexcept { return nx_; }
  std::size_t nz() const noexcept { return nz_; }
  double operator()(std::size_t x, std::size_t z) const { return q_[x * nz_ + z]; }
  const std::vector<double>& entries() const noexcept { return q_; }
  double column_sum(std::size_t z) const;
  double min_column_sum() const;
  /// (1 - w) * this + w * other.
  Channel mix(const Channel& other, double w) const;

 private:
  std::size_t nx_ = 0;
  std::size_t nz_ = 0;
  std::vector<double> q_;
};

/// Product mapping p_{Z|X}(z|x) = prod_t q_t(z_t|x_t) with a column floor.
class StochasticMapping {
 public:
  StochasticMapping() = default;
  /// Validates rows (sum 1, non-negative) and column sums >= delta_floor.
  StochasticMapping(std::vector<Channel> sensors, double delta_floor);

  static StochasticMapping uniform(std::size_t s, std::size_t nx, std::size_t nz,
                                   double delta_floor = 0.0);
  static StochasticMapping identity(std::size_t s, std::size_t nx, double delta_floor = 0.0);

  std::size_t num_sensors() const noexcept { return sensors_.size(); }
  std::size_t nx() const noexcept { return sensors_.empty() ? 0 : sensors_.front().nx(); }
  std::size_t nz() const noexcept { return sensors_.empty() ? 0 : sensors_.front().nz(); }
  double delta_floor() const noexcept { return delta_floor_; }
  const Channel& sensor(std::size_t t) const { return sensors_[t]; }
  const std::vector<Channel>& sensors() const noexcept { return sensors_; }
  StochasticMapping with_sensor(std::size_t t, Channel q) const;

 private:
  std::vector<Channel> sensors_;
  double delta_floor_ = 0.0;
};

/// Centralized p_{Z|X} over the full product alphabets (row-major [x][z]).
struct CentralizedMapping {
  std::size_t num_x = 0;
  std::size_t num_z = 0;
  std::vector<double> q;
};

/// Full joint table p(x_1..x_s, h, g) with x in mixed radix, sensor 0 most
/// significant; entry [x * 4 + hg_index(h, g)].
struct TensorLaw {
  std::size_t s = 0;
  std::size_t nx = 0;
  std::vector<double> joint;

  std::size_t num_x() const noexcept { return joint.size() / 4; }
  Distribution p_h() const;
  Distribution p_g() const;
  ConditionalTable x_given_h() const;
  ConditionalTable x_given_g() const;
};

class JointModel {
 public:
  enum class Mode { kFactored, kTensor };

  /// Conditionally independent sensors given (H, G). `conditionals[t][hg_index]`
  /// is p_{X_t | H, G}.
  static JointModel factored(Distribution hg_prior,
                             std::vector<std::array<Distribution, 4>> conditionals,
                             std::size_t quant_alphabet = 2,
                             std::optional<double> delta_floor = std::nullopt);
  static JointModel tensor(TensorLaw law, std::size_t quant_alphabet = 2,
                           std::optional<double> delta_floor = std::nullopt);

  Mode mode() const noexcept { return mode_; }
  std::size_t num_sensors() const noexcept { return s_; }
  std::size_t obs_alphabet() const noexcept { return nx_; }
  std::size_t quant_alphabet() const noexcept { return nz_; }
  double delta_floor() const noexcept { return delta_floor_; }
  const Distribution& hg_prior() const noexcept { return hg_prior_; }
  Distribution p_h() const;
  Distribution p_g() const;

  /// p_{X_t | H=h, G=g}; factored mode only.
  const Distribution& sensor_conditional(std::size_t t, std::size_t hg) const;
  const std::vector<std::array<Distribution, 4>>& sensor_conditionals() const;
  const TensorLaw& tensor_law() const;

  /// Full joint over X^s (cap on |X|^s).
  TensorLaw expand(std::size_t cap = kDefaultCap) const;
  /// min over x in X^s and g of p_{X|G}(x|g).
  double alpha(std::size_t cap = kDefaultCap) const;
  /// True when every sensor shares the same conditionals (factored mode).
  bool identical_sensors() const;
  /// Single-sensor marginal laws p_{X_t|H} and p_{X_t|G}.
  ConditionalTable sensor_x_given_h(std::size_t t) const;
  ConditionalTable sensor_x_given_g(std::size_t t) const;

  /// Copy with a different quantization alphabet / column floor.
  JointModel with_design(std::size_t quant_alphabet, std::optional<double> delta_floor) const;

 private:
  JointModel() = default;
  void validate_design(std::optional<double> delta_floor);
  void validate_support() const;

  Mode mode_ = Mode::kFactored;
  std::size_t s_ = 0;
  std::size_t nx_ = 0;
  std::size_t nz_ = 2;
  double delta_floor_ = 0.0;
  Distribution hg_prior_;
  std::vector<std::array<Distribution, 4>> conditionals_;
  TensorLaw tensor_;
};

/// Fusion-center laws of Z = (Z_1..Z_s). z in mixed radix, sensor 0 most significant.
struct FusionLaw {
  std::size_t num_z = 0;
  std::vector<double> joint;  // [z * 4 + hg_index(h, g)]

  ConditionalTable z_given_h() const;
  ConditionalTable z_given_g() const;
  Distribution p_z() const;
  Distribution p_h() const;
  Distribution p_g() const;
  /// Joint p(z, h) flattened as [z * 2 + h]; likewise for g.
  Distribution joint_zh() const;
  Distribution joint_zg() const;
};

FusionLaw push_forward(const JointModel& model, const StochasticMapping& mapping,
                       std::size_t z_cap = kDefaultCap);
FusionLaw push_forward(const TensorLaw& law, const CentralizedMapping& mapping);

/// Joint p(x_t, z_rest, h, g) for one sensor with every other sensor mapped
/// through `mapping`. `rest` runs over the sensors j != t in increasing order
/// (mixed radix, lowest j most significant). Entry [(x * num_rest + rest) * 4 + hg].
struct SensorSlice {
  std::size_t sensor = 0;
  std::size_t nx = 0;
  std::size_t nz = 0;
  std::size_t num_rest = 1;
  std::size_t low_span = 1;  // nz^(s - 1 - t)
  std::vector<double> table;

  /// Index in Z^s of (z_t, rest).
  std::size_t full_index(std::size_t z_t, std::size_t rest) const noexcept {
    return ((rest / low_span) * nz + z_t) * low_span + rest % low_span;
  }
};

SensorSlice sensor_slice(const JointModel& model, const StochasticMapping& mapping,
                         std::size_t t, std::size_t z_cap = kDefaultCap);

/// Pearson correlation of the binary pair (H, G) under the model prior.
double correlation_hg(const JointModel& model);
double correlation_hg(const Distribution& hg_prior);

/// 2x2 prior with the given marginals P(H=1), P(G=1) and correlation.
Distribution hg_prior_for_correlation(double rho, double p_h1 = 0.5, double p_g1 = 0.5);

/// I(X;H|G) over the full observation vector.
double conditional_mi_xh_given_g(const JointModel& model, std::size_t cap = kDefaultCap);
/// I(X;H) over the full observation vector.
double mutual_information_xh(const JointModel& model, std::size_t cap = kDefaultCap);

struct GenerateOptions {
  double alpha_floor = 1e-3;
  double concentration = 1.0;
  bool identical_sensors = true;
  double p_h1 = 0.5;
  double p_g1 = 0.5;
  std::size_t quant_alphabet = 2;
  std::optional<double> delta_floor;
  std::size_t cap = kDefaultCap;
};

/// Random factored model with a prescribed H-G correlation. With `mi_target`,
/// the conditionals are mixed toward p_{X|G} until I(X;H|G) matches within 5%.
JointModel generate_model(std::size_t s, std::size_t nx, double target_corr,
                          std::optional<double> mi_target, std::uint64_t seed,
                          const GenerateOptions& options = {});

/// Default column floor: 0.01 |X| / |Z|.
double default_delta_floor(std::size_t nx, std::size_t nz);

}  // namespace privdetect
