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

#include "privdetect/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace privdetect {

int thread_count() { return omp_get_max_threads(); }

void configure_threads_from_env() {
  const char* env = std::getenv("PRIVDETECT_THREADS");
  if (env == nullptr) return;
  try {
    const int n = std::stoi(env);
    if (n > 0) omp_set_num_threads(n);
  } catch (const std::exception&) {
    // Ignore malformed values; the runtime default stays in effect.
  }
}

}  // namespace privdetect
