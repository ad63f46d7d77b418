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

#include <cstddef>
#include <exception>
#include <mutex>

namespace privdetect {

/// Selects the OpenMP kernel or its serial reference. Both produce identical
/// results: parallel loops write to per-index slots and reductions run serially.
enum class Exec { kSerial, kParallel };

/// Number of OpenMP threads (honours PRIVDETECT_THREADS when set).
int thread_count();

/// Applies PRIVDETECT_THREADS, if set, to the OpenMP runtime. Idempotent.
void configure_threads_from_env();

/// Calls body(i) for i in [0, n), in parallel when exec == kParallel.
template <typename Body>
void parallel_for(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::kSerial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const long long count = static_cast<long long>(n);
  std::exception_ptr failure;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      // Exceptions must not escape an OpenMP region; keep the first and rethrow.
      std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace privdetect
