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

// On-disk formats for models and mappings (JSON documents).

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "privdetect/model.hpp"

namespace privdetect {

/// Serializes JSON with every floating value printed to 17 significant digits.
std::string dump_json(const nlohmann::json& doc, int indent = 2);

nlohmann::json model_to_json(const JointModel& model);
JointModel model_from_json(const nlohmann::json& doc);

nlohmann::json mapping_to_json(const StochasticMapping& mapping);
StochasticMapping mapping_from_json(const nlohmann::json& doc);

/// Reads and parses a JSON file; parse errors become SchemaError with path "$".
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

JointModel read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const JointModel& model);
StochasticMapping read_mapping(const std::filesystem::path& path);
void write_mapping(const std::filesystem::path& path, const StochasticMapping& mapping);

}  // namespace privdetect
