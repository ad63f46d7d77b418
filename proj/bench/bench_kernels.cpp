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

// Serial vs OpenMP timings of the enumeration kernels.

#include <benchmark/benchmark.h>

#include "privdetect/asymptotic.hpp"
#include "privdetect/pbpo.hpp"

namespace privdetect {
namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::kSerial : Exec::kParallel; }

void BM_SensorCoefficients(benchmark::State& state) {
  const auto nx = static_cast<std::size_t>(state.range(1));
  const JointModel model = generate_model(3, nx, 0.5, std::nullopt, 1);
  const StochasticMapping mapping = StochasticMapping::uniform(3, nx, 2, model.delta_floor());
  const FusionRule rule = bayes_fusion_rule(model, mapping);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lp_coefficients_for_sensor(model, mapping, rule, 0, exec_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(phi_count(nx, 2)));
}
BENCHMARK(BM_SensorCoefficients)->ArgNames({"parallel", "nx"})->ArgsProduct({{0, 1}, {8, 12}})->Unit(benchmark::kMillisecond);

void BM_MuTable(benchmark::State& state) {
  const auto nx = static_cast<std::size_t>(state.range(1));
  GenerateOptions o;
  o.quant_alphabet = 3;
  const JointModel model = generate_model(2, nx, 0.5, std::nullopt, 2, o);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mu_table(model, 0.4, Hypothesis::kH, 3, exec_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(phi_count(nx, 3)));
}
BENCHMARK(BM_MuTable)->ArgNames({"parallel", "nx"})->ArgsProduct({{0, 1}, {6, 9}})->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace privdetect

BENCHMARK_MAIN();
