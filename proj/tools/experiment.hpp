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

// Experiment harness: JSON experiment configs, sweep execution and the CSV +
// manifest outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "privdetect/model.hpp"

namespace privdetect::cli {

enum class ExperimentKind { kBoundsSweep, kRatioSweep, kCorrSweep, kExponentSweep, kCardinalitySweep, kCompare };

const char* to_string(ExperimentKind kind) noexcept;
ExperimentKind parse_kind(const std::string& name);

/// Scale presets for generated models: desk (s=3, |X|=8, |Z|=2) and full (s=4, |X|=16, |Z|=2).
struct Profile {
  std::size_t sensors = 3;
  std::size_t nx = 8;
  std::size_t nz = 2;
};
Profile profile_by_name(const std::string& name);

struct GenerateParams {
  std::size_t sensors = 3;
  std::size_t nx = 8;
  std::size_t nz = 2;
  double corr = 0.5;
  std::optional<double> mi_target;
  std::optional<double> delta_floor;
  double concentration = 1.0;
  double alpha_floor = 1e-3;
  double p_h1 = 0.5;
  double p_g1 = 0.5;

  JointModel generate(std::uint64_t seed, std::size_t cap = kDefaultCap) const;
};

struct PbpoSettings {
  double xi = 1e-4;
  std::size_t max_iters = 200;
  std::optional<double> noise_scale;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kRatioSweep;
  std::optional<std::filesystem::path> model_file;
  GenerateParams generate;
  std::vector<std::uint64_t> seeds{0};
  PbpoSettings pbpo;

  // Sweep axes; each kind reads the ones it uses.
  std::vector<double> epsilon;
  std::vector<double> delta{0.0};
  std::vector<double> r;
  std::vector<double> corr;
  std::vector<double> beta;
  std::vector<std::size_t> nz;

  bool optimize = true;          // bounds-sweep: also run PBPO in epsilon mode
  std::size_t samples = 200;     // sampled contaminated hypotheses for bounds
  std::optional<std::string> anchor;  // compare: "nominal" | "mf"
  double tolerance = 1e-3;       // compare calibration tolerance
  std::optional<double> time_limit_seconds;
  std::size_t cap = kDefaultCap;

  std::filesystem::path output_dir = ".";
  std::string stem;  // defaults to the kind name
};

/// Parses an experiment config, or the config echoed inside a manifest.
/// Malformed input raises SchemaError with the offending field path.
ExperimentConfig parse_experiment(const nlohmann::json& doc);
nlohmann::json experiment_to_json(const ExperimentConfig& config);

enum class ColumnType { kInt, kReal, kString, kBool };

struct CsvSchema {
  std::vector<std::string> columns;
  std::vector<ColumnType> types;
  std::size_t rows = 0;
};

/// Expected CSV layout of an experiment: one row per grid point (per metric for compare).
CsvSchema experiment_schema(const ExperimentConfig& config);

/// Throws SchemaError (path "csv:<line>") when the text deviates from the schema.
void check_csv(const std::string& text, const CsvSchema& schema);

nlohmann::json schema_to_json(const CsvSchema& schema);
CsvSchema schema_from_json(const nlohmann::json& doc);

struct ExperimentOutputs {
  std::filesystem::path csv;
  std::filesystem::path manifest;
  std::size_t rows = 0;
  bool partial = false;
};

/// Runs every grid point (in parallel), then writes <stem>.csv and
/// <stem>.manifest.json under the output directory. The CSV depends only on
/// the config; wall times go to the manifest.
ExperimentOutputs run_experiment(const ExperimentConfig& config);

/// Renders a double for CSV output: %.17g, with nan / inf spelled out.
std::string format_real(double v);

}  // namespace privdetect::cli
