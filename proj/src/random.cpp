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

#include "privdetect/random.hpp"

#include "privdetect/error.hpp"

namespace privdetect {

std::vector<double> sample_dirichlet(Rng& rng, std::size_t n, double concentration) {
  if (n == 0 || !(concentration > 0.0)) throw ValidationError("dirichlet: bad parameters");
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> out(n);
  double total = 0.0;
  do {
    total = 0.0;
    for (double& v : out) {
      v = gamma(rng);
      total += v;
    }
  } while (!(total > 0.0));
  for (double& v : out) v /= total;
  return out;
}

}  // namespace privdetect
