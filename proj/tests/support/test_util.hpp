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

#include <cstdint>
#include <random>
#include <vector>

#include "privdetect/prob.hpp"

namespace privdetect::testing {

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n,
                                          double zero_prob = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution zero(zero_prob);
  std::vector<double> v(n);
  double total = 0.0;
  while (!(total > 0.0)) {
    total = 0.0;
    for (double& x : v) {
      x = zero(rng) ? 0.0 : e(rng);
      total += x;
    }
  }
  for (double& x : v) x /= total;
  return v;
}

inline Distribution random_distribution(std::mt19937_64& rng, std::size_t n,
                                        double zero_prob = 0.0) {
  return Distribution::normalized(random_simplex(rng, n, zero_prob));
}

inline ConditionalTable random_binary_conditional(std::mt19937_64& rng, std::size_t n,
                                                  double zero_prob = 0.0) {
  return ConditionalTable({random_distribution(rng, n, zero_prob),
                           random_distribution(rng, n, zero_prob)});
}

inline ConditionalTable table(std::vector<double> r0, std::vector<double> r1) {
  return ConditionalTable({Distribution(std::move(r0)), Distribution(std::move(r1))});
}

}  // namespace privdetect::testing
