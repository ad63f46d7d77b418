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

#include "privdetect/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "privdetect/error.hpp"
#include "privdetect/random.hpp"

namespace privdetect {

namespace {

constexpr double kRowTol = 1e-10;

std::string idx(std::size_t i) { return std::to_string(i); }

// Contracts axis `t` (size n_in) of a row-major tensor with leading block
// `outer` and trailing block `inner` against a row-stochastic matrix.
std::vector<double> contract_axis(const std::vector<double>& in, std::size_t outer,
                                  std::size_t n_in, std::size_t inner, const Channel& q) {
  const std::size_t n_out = q.nz();
  std::vector<double> out(outer * n_out * inner, 0.0);
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t x = 0; x < n_in; ++x) {
      const double* src = &in[(a * n_in + x) * inner];
      for (std::size_t z = 0; z < n_out; ++z) {
        const double w = q(x, z);
        if (w == 0.0) continue;
        double* dst = &out[(a * n_out + z) * inner];
        for (std::size_t b = 0; b < inner; ++b) dst[b] += w * src[b];
      }
    }
  }
  return out;
}

ConditionalTable conditional_from_joint(const std::vector<double>& joint, std::size_t n,
                                        bool on_h) {
  std::vector<std::vector<double>> rows(2, std::vector<double>(n, 0.0));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t g = 0; g < 2; ++g) {
        rows[on_h ? h : g][x] += joint[x * 4 + hg_index(h, g)];
      }
    }
  }
  return ConditionalTable({Distribution::normalized(std::move(rows[0])),
                           Distribution::normalized(std::move(rows[1]))});
}

Distribution marginal_from_joint(const std::vector<double>& joint, bool on_h) {
  std::vector<double> m(2, 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const std::size_t hg = i % 4;
    m[on_h ? hg / 2 : hg % 2] += joint[i];
  }
  return Distribution::normalized(std::move(m));
}

Distribution marginal_of_prior(const Distribution& hg, bool on_h) {
  return marginal_from_joint(hg.vec(), on_h);
}

}  // namespace

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap, const char* what) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && out > cap / base) {
      throw CapExceededError(std::string(what) + ": " + std::to_string(base) + "^" +
                             std::to_string(exp) + " exceeds cap " + std::to_string(cap));
    }
    out *= base;
  }
  if (out > cap) {
    throw CapExceededError(std::string(what) + ": size exceeds cap " + std::to_string(cap));
  }
  return out;
}

// ---------------------------------------------------------------- Channel

Channel::Channel(std::size_t nx, std::size_t nz, std::vector<double> entries)
    : nx_(nx), nz_(nz), q_(std::move(entries)) {
  if (nx_ == 0 || nz_ == 0) throw ValidationError("mapping: empty alphabet");
  if (q_.size() != nx_ * nz_) throw ValidationError("mapping: entry count mismatch");
  for (std::size_t x = 0; x < nx_; ++x) {
    double row = 0.0;
    for (std::size_t z = 0; z < nz_; ++z) {
      const double v = q_[x * nz_ + z];
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("mapping: q(" + idx(z) + "|" + idx(x) + ") is negative");
      }
      row += v;
    }
    if (std::abs(row - 1.0) > kRowTol) {
      throw ValidationError("mapping: row " + idx(x) + " sums to " + std::to_string(row));
    }
  }
}

Channel Channel::uniform(std::size_t nx, std::size_t nz) {
  return Channel(nx, nz, std::vector<double>(nx * nz, 1.0 / static_cast<double>(nz)));
}

Channel Channel::identity(std::size_t n) {
  std::vector<double> q(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;
  return Channel(n, n, std::move(q));
}

Channel Channel::from_deterministic(const DeterministicMapping& phi) {
  std::vector<double> q(phi.nx() * phi.nz, 0.0);
  for (std::size_t x = 0; x < phi.nx(); ++x) {
    if (phi.table[x] >= phi.nz) throw ValidationError("deterministic mapping: value out of range");
    q[x * phi.nz + phi.table[x]] = 1.0;
  }
  return Channel(phi.nx(), phi.nz, std::move(q));
}

double Channel::column_sum(std::size_t z) const {
  double acc = 0.0;
  for (std::size_t x = 0; x < nx_; ++x) acc += q_[x * nz_ + z];
  return acc;
}

double Channel::min_column_sum() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < nz_; ++z) m = std::min(m, column_sum(z));
  return m;
}

Channel Channel::mix(const Channel& other, double w) const {
  if (other.nx_ != nx_ || other.nz_ != nz_) throw ValidationError("mapping mix: shape mismatch");
  std::vector<double> q(q_.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = (1.0 - w) * q_[i] + w * other.q_[i];
  return Channel(nx_, nz_, std::move(q));
}

// ------------------------------------------------------ StochasticMapping

StochasticMapping::StochasticMapping(std::vector<Channel> sensors, double delta_floor)
    : sensors_(std::move(sensors)), delta_floor_(delta_floor) {
  if (sensors_.empty()) throw ValidationError("mapping: no sensors");
  const std::size_t nx = sensors_.front().nx();
  const std::size_t nz = sensors_.front().nz();
  if (!(delta_floor_ >= 0.0) ||
      delta_floor_ > static_cast<double>(nx) / static_cast<double>(nz) + kNormTol) {
    throw ValidationError("mapping: column floor must lie in [0, |X|/|Z|]");
  }
  for (std::size_t t = 0; t < sensors_.size(); ++t) {
    if (sensors_[t].nx() != nx || sensors_[t].nz() != nz) {
      throw ValidationError("mapping: sensor " + idx(t) + " has mismatched alphabets");
    }
    for (std::size_t z = 0; z < nz; ++z) {
      const double col = sensors_[t].column_sum(z);
      if (col < delta_floor_ - 1e-12) {
        throw ValidationError("mapping: sensor " + idx(t) + " column " + idx(z) + " sums to " +
                              std::to_string(col) + " < floor " + std::to_string(delta_floor_));
      }
    }
  }
}

StochasticMapping StochasticMapping::uniform(std::size_t s, std::size_t nx, std::size_t nz,
                                             double delta_floor) {
  return StochasticMapping(std::vector<Channel>(s, Channel::uniform(nx, nz)), delta_floor);
}

StochasticMapping StochasticMapping::identity(std::size_t s, std::size_t nx, double delta_floor) {
  return StochasticMapping(std::vector<Channel>(s, Channel::identity(nx)), delta_floor);
}

StochasticMapping StochasticMapping::with_sensor(std::size_t t, Channel q) const {
  auto sensors = sensors_;
  sensors.at(t) = std::move(q);
  return StochasticMapping(std::move(sensors), delta_floor_);
}

// --------------------------------------------------------------- TensorLaw

Distribution TensorLaw::p_h() const { return marginal_from_joint(joint, true); }
Distribution TensorLaw::p_g() const { return marginal_from_joint(joint, false); }
ConditionalTable TensorLaw::x_given_h() const {
  return conditional_from_joint(joint, num_x(), true);
}
ConditionalTable TensorLaw::x_given_g() const {
  return conditional_from_joint(joint, num_x(), false);
}

// -------------------------------------------------------------- JointModel

JointModel JointModel::factored(Distribution hg_prior,
                                std::vector<std::array<Distribution, 4>> conditionals,
                                std::size_t quant_alphabet, std::optional<double> delta_floor) {
  JointModel m;
  m.mode_ = Mode::kFactored;
  if (hg_prior.size() != 4) throw ValidationError("model: hg_prior must have 4 entries");
  if (conditionals.empty()) throw ValidationError("model: no sensors");
  m.s_ = conditionals.size();
  m.nx_ = conditionals.front()[0].size();
  if (m.nx_ < 2) throw ValidationError("model: observation alphabet must have >= 2 symbols");
  for (std::size_t t = 0; t < m.s_; ++t) {
    for (std::size_t hg = 0; hg < 4; ++hg) {
      if (conditionals[t][hg].size() != m.nx_) {
        throw ValidationError("model: sensor " + idx(t) + " conditional " + idx(hg) +
                              " has wrong alphabet size");
      }
    }
  }
  m.hg_prior_ = std::move(hg_prior);
  m.conditionals_ = std::move(conditionals);
  m.nz_ = quant_alphabet;
  m.validate_design(delta_floor);
  m.validate_support();
  return m;
}

JointModel JointModel::tensor(TensorLaw law, std::size_t quant_alphabet,
                              std::optional<double> delta_floor) {
  JointModel m;
  m.mode_ = Mode::kTensor;
  if (law.s == 0 || law.nx < 2) throw ValidationError("model: bad tensor dimensions");
  const std::size_t n = checked_power(law.nx, law.s, kDefaultCap, "model tensor");
  if (law.joint.size() != n * 4) throw ValidationError("model: tensor entry count mismatch");
  // Validates non-negativity and normalization.
  const Distribution all(law.joint);
  std::vector<double> hg(4, 0.0);
  for (std::size_t i = 0; i < law.joint.size(); ++i) hg[i % 4] += law.joint[i];
  m.hg_prior_ = Distribution::normalized(std::move(hg));
  m.s_ = law.s;
  m.nx_ = law.nx;
  m.tensor_ = std::move(law);
  m.nz_ = quant_alphabet;
  m.validate_design(delta_floor);
  m.validate_support();
  return m;
}

void JointModel::validate_design(std::optional<double> delta_floor) {
  if (nz_ < 2) throw ValidationError("model: quantization alphabet must have >= 2 symbols");
  const Distribution ph = p_h();
  const Distribution pg = p_g();
  if (!(ph.min() > 0.0)) throw ValidationError("model: min_h p_H(h) must be positive");
  if (!(pg.min() > 0.0)) throw ValidationError("model: min_g p_G(g) must be positive");
  delta_floor_ = delta_floor.value_or(default_delta_floor(nx_, nz_));
  if (!(delta_floor_ >= 0.0) ||
      delta_floor_ > static_cast<double>(nx_) / static_cast<double>(nz_) + kNormTol) {
    throw ValidationError("model: delta_floor must lie in [0, |X|/|Z|]");
  }
}

void JointModel::validate_support() const {
  std::size_t n = 0;
  try {
    n = checked_power(nx_, s_, kDefaultCap, "support check");
  } catch (const CapExceededError&) {
    // Per-sensor sufficient condition when the full table is too large.
    for (std::size_t t = 0; t < s_; ++t) {
      const auto xg = sensor_x_given_g(t);
      if (!(xg.row(0).min() > 0.0 && xg.row(1).min() > 0.0)) {
        throw ValidationError("model: support condition p(x|g) > 0 violated at sensor " + idx(t));
      }
    }
    return;
  }
  (void)n;
  if (!(alpha() > 0.0)) {
    throw ValidationError("model: support condition p(x|g) > 0 violated");
  }
}

Distribution JointModel::p_h() const { return marginal_of_prior(hg_prior_, true); }
Distribution JointModel::p_g() const { return marginal_of_prior(hg_prior_, false); }

const Distribution& JointModel::sensor_conditional(std::size_t t, std::size_t hg) const {
  if (mode_ != Mode::kFactored) throw ValidationError("model: not in factored mode");
  return conditionals_.at(t).at(hg);
}

const std::vector<std::array<Distribution, 4>>& JointModel::sensor_conditionals() const {
  if (mode_ != Mode::kFactored) throw ValidationError("model: not in factored mode");
  return conditionals_;
}

const TensorLaw& JointModel::tensor_law() const {
  if (mode_ != Mode::kTensor) throw ValidationError("model: not in tensor mode");
  return tensor_;
}

TensorLaw JointModel::expand(std::size_t cap) const {
  const std::size_t n = checked_power(nx_, s_, cap, "observation tensor |X|^s");
  if (mode_ == Mode::kTensor) return tensor_;
  TensorLaw out{s_, nx_, std::vector<double>(n * 4)};
  // Build sensor by sensor: start from the prior and append one axis at a time.
  std::vector<double> cur(hg_prior_.vec());
  std::size_t size = 1;
  for (std::size_t t = 0; t < s_; ++t) {
    std::vector<double> next(size * nx_ * 4);
    for (std::size_t a = 0; a < size; ++a) {
      for (std::size_t x = 0; x < nx_; ++x) {
        for (std::size_t hg = 0; hg < 4; ++hg) {
          next[(a * nx_ + x) * 4 + hg] = cur[a * 4 + hg] * conditionals_[t][hg][x];
        }
      }
    }
    cur = std::move(next);
    size *= nx_;
  }
  out.joint = std::move(cur);
  return out;
}

double JointModel::alpha(std::size_t cap) const {
  const ConditionalTable xg = expand(cap).x_given_g();
  return std::min(xg.row(0).min(), xg.row(1).min());
}

bool JointModel::identical_sensors() const {
  if (mode_ != Mode::kFactored) return false;
  for (std::size_t t = 1; t < s_; ++t) {
    for (std::size_t hg = 0; hg < 4; ++hg) {
      if (conditionals_[t][hg].vec() != conditionals_[0][hg].vec()) return false;
    }
  }
  return true;
}

ConditionalTable JointModel::sensor_x_given_h(std::size_t t) const {
  if (t >= s_) throw ValidationError("model: sensor index out of range");
  std::vector<double> joint(nx_ * 4, 0.0);
  if (mode_ == Mode::kFactored) {
    for (std::size_t x = 0; x < nx_; ++x) {
      for (std::size_t hg = 0; hg < 4; ++hg) {
        joint[x * 4 + hg] = hg_prior_[hg] * conditionals_[t][hg][x];
      }
    }
  } else {
    std::size_t inner = 1;
    for (std::size_t j = t + 1; j < s_; ++j) inner *= nx_;
    for (std::size_t i = 0; i < tensor_.num_x(); ++i) {
      const std::size_t x = (i / inner) % nx_;
      for (std::size_t hg = 0; hg < 4; ++hg) joint[x * 4 + hg] += tensor_.joint[i * 4 + hg];
    }
  }
  return conditional_from_joint(joint, nx_, true);
}

ConditionalTable JointModel::sensor_x_given_g(std::size_t t) const {
  if (t >= s_) throw ValidationError("model: sensor index out of range");
  std::vector<double> joint(nx_ * 4, 0.0);
  if (mode_ == Mode::kFactored) {
    for (std::size_t x = 0; x < nx_; ++x) {
      for (std::size_t hg = 0; hg < 4; ++hg) {
        joint[x * 4 + hg] = hg_prior_[hg] * conditionals_[t][hg][x];
      }
    }
  } else {
    std::size_t inner = 1;
    for (std::size_t j = t + 1; j < s_; ++j) inner *= nx_;
    for (std::size_t i = 0; i < tensor_.num_x(); ++i) {
      const std::size_t x = (i / inner) % nx_;
      for (std::size_t hg = 0; hg < 4; ++hg) joint[x * 4 + hg] += tensor_.joint[i * 4 + hg];
    }
  }
  return conditional_from_joint(joint, nx_, false);
}

JointModel JointModel::with_design(std::size_t quant_alphabet,
                                   std::optional<double> delta_floor) const {
  JointModel m = *this;
  m.nz_ = quant_alphabet;
  m.validate_design(delta_floor);
  return m;
}

// -------------------------------------------------------------- FusionLaw

ConditionalTable FusionLaw::z_given_h() const { return conditional_from_joint(joint, num_z, true); }
ConditionalTable FusionLaw::z_given_g() const {
  return conditional_from_joint(joint, num_z, false);
}
Distribution FusionLaw::p_h() const { return marginal_from_joint(joint, true); }
Distribution FusionLaw::p_g() const { return marginal_from_joint(joint, false); }

Distribution FusionLaw::p_z() const {
  std::vector<double> m(num_z, 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) m[i / 4] += joint[i];
  return Distribution::unchecked(std::move(m));
}

Distribution FusionLaw::joint_zh() const {
  std::vector<double> m(num_z * 2, 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) m[(i / 4) * 2 + (i % 4) / 2] += joint[i];
  return Distribution::unchecked(std::move(m));
}

Distribution FusionLaw::joint_zg() const {
  std::vector<double> m(num_z * 2, 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) m[(i / 4) * 2 + (i % 4) % 2] += joint[i];
  return Distribution::unchecked(std::move(m));
}

FusionLaw push_forward(const JointModel& model, const StochasticMapping& mapping,
                       std::size_t z_cap) {
  const std::size_t s = model.num_sensors();
  if (mapping.num_sensors() != s || mapping.nx() != model.obs_alphabet()) {
    throw ValidationError("push_forward: mapping does not match model alphabets");
  }
  const std::size_t nz = mapping.nz();
  const std::size_t num_z = checked_power(nz, s, z_cap, "fusion alphabet |Z|^s");
  FusionLaw out{num_z, {}};

  if (model.mode() == JointModel::Mode::kFactored) {
    // u[t][hg][z] = sum_x q_t(z|x) p_t(x|hg)
    std::vector<std::vector<double>> u(s, std::vector<double>(4 * nz, 0.0));
    for (std::size_t t = 0; t < s; ++t) {
      const Channel& q = mapping.sensor(t);
      for (std::size_t hg = 0; hg < 4; ++hg) {
        const Distribution& p = model.sensor_conditional(t, hg);
        for (std::size_t x = 0; x < q.nx(); ++x) {
          for (std::size_t z = 0; z < nz; ++z) u[t][hg * nz + z] += q(x, z) * p[x];
        }
      }
    }
    std::vector<double> cur(model.hg_prior().vec());
    std::size_t size = 1;
    for (std::size_t t = 0; t < s; ++t) {
      std::vector<double> next(size * nz * 4);
      for (std::size_t a = 0; a < size; ++a) {
        for (std::size_t z = 0; z < nz; ++z) {
          for (std::size_t hg = 0; hg < 4; ++hg) {
            next[(a * nz + z) * 4 + hg] = cur[a * 4 + hg] * u[t][hg * nz + z];
          }
        }
      }
      cur = std::move(next);
      size *= nz;
    }
    out.joint = std::move(cur);
    return out;
  }

  const TensorLaw& law = model.tensor_law();
  std::vector<double> cur = law.joint;
  const std::size_t nx = law.nx;
  // Axes processed left to right; sensors < t already mapped to Z.
  for (std::size_t t = 0; t < s; ++t) {
    std::size_t outer = 1;
    for (std::size_t j = 0; j < t; ++j) outer *= nz;
    std::size_t inner = 4;
    for (std::size_t j = t + 1; j < s; ++j) inner *= nx;
    cur = contract_axis(cur, outer, nx, inner, mapping.sensor(t));
  }
  out.joint = std::move(cur);
  return out;
}

SensorSlice sensor_slice(const JointModel& model, const StochasticMapping& mapping,
                         std::size_t t, std::size_t z_cap) {
  const std::size_t s = model.num_sensors();
  if (mapping.num_sensors() != s || mapping.nx() != model.obs_alphabet()) {
    throw ValidationError("sensor_slice: mapping does not match model alphabets");
  }
  if (t >= s) throw ValidationError("sensor_slice: sensor index out of range");
  const std::size_t nx = model.obs_alphabet();
  const std::size_t nz = mapping.nz();
  SensorSlice out;
  out.sensor = t;
  out.nx = nx;
  out.nz = nz;
  out.num_rest = checked_power(nz, s - 1, z_cap, "fusion alphabet |Z|^(s-1)");
  checked_power(nz, s, z_cap, "fusion alphabet |Z|^s");
  for (std::size_t j = t + 1; j < s; ++j) out.low_span *= nz;
  out.table.assign(nx * out.num_rest * 4, 0.0);

  if (model.mode() == JointModel::Mode::kFactored) {
    // rest_weight[rest * 4 + hg] = p(hg) prod_{j != t} u_j(z_j | hg)
    std::vector<double> rest_weight(model.hg_prior().vec());
    for (std::size_t j = 0; j < s; ++j) {
      if (j == t) continue;
      const Channel& q = mapping.sensor(j);
      std::vector<double> u(4 * nz, 0.0);
      for (std::size_t hg = 0; hg < 4; ++hg) {
        const Distribution& p = model.sensor_conditional(j, hg);
        for (std::size_t x = 0; x < nx; ++x) {
          for (std::size_t z = 0; z < nz; ++z) u[hg * nz + z] += q(x, z) * p[x];
        }
      }
      std::vector<double> next(rest_weight.size() * nz);
      for (std::size_t a = 0; a < rest_weight.size() / 4; ++a) {
        for (std::size_t z = 0; z < nz; ++z) {
          for (std::size_t hg = 0; hg < 4; ++hg) {
            next[(a * nz + z) * 4 + hg] = rest_weight[a * 4 + hg] * u[hg * nz + z];
          }
        }
      }
      rest_weight = std::move(next);
    }
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t r = 0; r < out.num_rest; ++r) {
        for (std::size_t hg = 0; hg < 4; ++hg) {
          out.table[(x * out.num_rest + r) * 4 + hg] =
              model.sensor_conditional(t, hg)[x] * rest_weight[r * 4 + hg];
        }
      }
    }
    return out;
  }

  // Tensor mode: contract every axis except t, then move x_t to the front.
  std::vector<double> cur = model.tensor_law().joint;
  for (std::size_t j = 0; j < s; ++j) {
    if (j == t) continue;
    std::size_t outer = 1;
    for (std::size_t i = 0; i < j; ++i) outer *= i == t ? nx : nz;
    std::size_t inner = 4;
    for (std::size_t i = j + 1; i < s; ++i) inner *= nx;
    cur = contract_axis(cur, outer, nx, inner, mapping.sensor(j));
  }
  // Layout now: (z_0..z_{t-1}, x_t, z_{t+1}..z_{s-1}, hg).
  const std::size_t high = out.num_rest / out.low_span;
  const std::size_t low = out.low_span;
  for (std::size_t h = 0; h < high; ++h) {
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t l = 0; l < low; ++l) {
        const std::size_t r = h * low + l;
        for (std::size_t hg = 0; hg < 4; ++hg) {
          out.table[(x * out.num_rest + r) * 4 + hg] = cur[((h * nx + x) * low + l) * 4 + hg];
        }
      }
    }
  }
  return out;
}

FusionLaw push_forward(const TensorLaw& law, const CentralizedMapping& mapping) {
  if (mapping.num_x != law.num_x() || mapping.q.size() != mapping.num_x * mapping.num_z) {
    throw ValidationError("push_forward: centralized mapping does not match observation tensor");
  }
  FusionLaw out{mapping.num_z, std::vector<double>(mapping.num_z * 4, 0.0)};
  for (std::size_t x = 0; x < mapping.num_x; ++x) {
    for (std::size_t z = 0; z < mapping.num_z; ++z) {
      const double w = mapping.q[x * mapping.num_z + z];
      if (w == 0.0) continue;
      for (std::size_t hg = 0; hg < 4; ++hg) out.joint[z * 4 + hg] += w * law.joint[x * 4 + hg];
    }
  }
  return out;
}

// ------------------------------------------------------------ correlation

double correlation_hg(const Distribution& hg_prior) {
  if (hg_prior.size() != 4) throw ValidationError("correlation: prior must have 4 entries");
  const double ph = hg_prior[hg_index(1, 0)] + hg_prior[hg_index(1, 1)];
  const double pg = hg_prior[hg_index(0, 1)] + hg_prior[hg_index(1, 1)];
  const double var = ph * (1.0 - ph) * pg * (1.0 - pg);
  if (!(var > 0.0)) throw ValidationError("correlation: degenerate marginal");
  return (hg_prior[hg_index(1, 1)] - ph * pg) / std::sqrt(var);
}

double correlation_hg(const JointModel& model) { return correlation_hg(model.hg_prior()); }

Distribution hg_prior_for_correlation(double rho, double p_h1, double p_g1) {
  if (!(p_h1 > 0.0 && p_h1 < 1.0 && p_g1 > 0.0 && p_g1 < 1.0)) {
    throw ValidationError("correlation: marginals must lie in (0,1)");
  }
  if (!(rho > -1.0 && rho < 1.0) && rho != 1.0 && rho != -1.0) {
    throw ValidationError("correlation: target must lie in [-1,1]");
  }
  const double p11 = p_h1 * p_g1 + rho * std::sqrt(p_h1 * (1 - p_h1) * p_g1 * (1 - p_g1));
  const double p10 = p_h1 - p11;
  const double p01 = p_g1 - p11;
  const double p00 = 1.0 - p11 - p10 - p01;
  std::vector<double> m(4);
  m[hg_index(0, 0)] = p00;
  m[hg_index(0, 1)] = p01;
  m[hg_index(1, 0)] = p10;
  m[hg_index(1, 1)] = p11;
  for (double v : m) {
    if (v < -1e-15) {
      throw ValidationError("correlation " + std::to_string(rho) +
                            " is infeasible for the requested marginals");
    }
  }
  for (double& v : m) v = std::max(0.0, v);
  return Distribution::normalized(std::move(m));
}

// ------------------------------------------------------ information terms

double conditional_mi_xh_given_g(const JointModel& model, std::size_t cap) {
  const TensorLaw law = model.expand(cap);
  const Distribution pg = model.p_g();
  double total = 0.0;
  for (std::size_t g = 0; g < 2; ++g) {
    std::vector<double> prior(2);
    std::vector<std::vector<double>> rows(2, std::vector<double>(law.num_x()));
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t x = 0; x < law.num_x(); ++x) {
        rows[h][x] = law.joint[x * 4 + hg_index(h, g)];
        prior[h] += rows[h][x];
      }
    }
    const Distribution ph_given_g = Distribution::normalized(prior);
    std::vector<Distribution> cond;
    for (std::size_t h = 0; h < 2; ++h) {
      if (prior[h] > 0.0) {
        cond.push_back(Distribution::normalized(std::move(rows[h])));
      } else {
        cond.push_back(Distribution::uniform(law.num_x()));
      }
    }
    total += pg[g] * mutual_information(ConditionalTable(std::move(cond)), ph_given_g);
  }
  return total;
}

double mutual_information_xh(const JointModel& model, std::size_t cap) {
  const TensorLaw law = model.expand(cap);
  return mutual_information(law.x_given_h(), law.p_h());
}

double default_delta_floor(std::size_t nx, std::size_t nz) {
  return 0.01 * static_cast<double>(nx) / static_cast<double>(nz);
}

// ------------------------------------------------------------- generation

namespace {

using Conditionals = std::vector<std::array<Distribution, 4>>;

Conditionals mix_toward_g(const Conditionals& base, const Distribution& hg_prior, double w) {
  Conditionals out = base;
  for (auto& sensor : out) {
    const std::size_t nx = sensor[0].size();
    std::array<std::vector<double>, 2> xg{std::vector<double>(nx, 0.0),
                                          std::vector<double>(nx, 0.0)};
    for (std::size_t g = 0; g < 2; ++g) {
      const double pg = hg_prior[hg_index(0, g)] + hg_prior[hg_index(1, g)];
      for (std::size_t h = 0; h < 2; ++h) {
        const double phg = hg_prior[hg_index(h, g)] / pg;
        for (std::size_t x = 0; x < nx; ++x) xg[g][x] += phg * sensor[hg_index(h, g)][x];
      }
    }
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t g = 0; g < 2; ++g) {
        std::vector<double> m(nx);
        const auto& cur = sensor[hg_index(h, g)];
        for (std::size_t x = 0; x < nx; ++x) m[x] = (1.0 - w) * cur[x] + w * xg[g][x];
        sensor[hg_index(h, g)] = Distribution::normalized(std::move(m));
      }
    }
  }
  return out;
}

}  // namespace

JointModel generate_model(std::size_t s, std::size_t nx, double target_corr,
                          std::optional<double> mi_target, std::uint64_t seed,
                          const GenerateOptions& options) {
  if (s < 1) throw ValidationError("generate_model: need at least one sensor");
  if (nx < 2) throw ValidationError("generate_model: alphabet sizes must be >= 2");
  if (!(target_corr > -1.0 && target_corr < 1.0)) {
    throw ValidationError("generate_model: target correlation must lie in (-1,1)");
  }
  const double inv_nx = 1.0 / static_cast<double>(nx);
  if (!(options.alpha_floor >= 0.0 && options.alpha_floor < inv_nx)) {
    throw ValidationError("generate_model: alpha_floor must lie in [0, 1/|X|)");
  }
  const Distribution prior = hg_prior_for_correlation(target_corr, options.p_h1, options.p_g1);

  Rng rng(seed);
  auto draw = [&] {
    std::vector<double> p = sample_dirichlet(rng, nx, options.concentration);
    const double m = *std::min_element(p.begin(), p.end());
    if (m < options.alpha_floor) {
      const double w = (options.alpha_floor - m) / (inv_nx - m);
      for (double& v : p) v = (1.0 - w) * v + w * inv_nx;
    }
    return Distribution::normalized(std::move(p));
  };
  Conditionals conds;
  for (std::size_t t = 0; t < s; ++t) {
    if (options.identical_sensors && t > 0) {
      conds.push_back(conds.front());
      continue;
    }
    conds.push_back({draw(), draw(), draw(), draw()});
  }

  auto build = [&](const Conditionals& c) {
    return JointModel::factored(prior, c, options.quant_alphabet, options.delta_floor);
  };
  if (!mi_target) return build(conds);

  const double target = *mi_target;
  if (!(target >= 0.0)) throw ValidationError("generate_model: mi_target must be >= 0");
  const double base_mi = conditional_mi_xh_given_g(build(conds), options.cap);
  if (target > base_mi * 1.05) {
    throw ValidationError("generate_model: mi_target " + std::to_string(target) +
                          " exceeds the informativeness of the drawn model (" +
                          std::to_string(base_mi) + ")");
  }
  if (std::abs(base_mi - target) <= 0.05 * target) return build(conds);
  if (target == 0.0) return build(mix_toward_g(conds, prior, 1.0));
  // I(X;H|G) decreases from base_mi to 0 as w goes 0 -> 1.
  double lo = 0.0;
  double hi = 1.0;
  Conditionals best = mix_toward_g(conds, prior, 1.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    Conditionals c = mix_toward_g(conds, prior, mid);
    const double mi = conditional_mi_xh_given_g(build(c), options.cap);
    if (std::abs(mi - target) <= 0.05 * target) return build(c);
    if (mi > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    best = std::move(c);
  }
  return build(best);
}

}  // namespace privdetect
