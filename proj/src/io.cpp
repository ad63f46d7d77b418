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

#include "privdetect/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "privdetect/error.hpp"

namespace privdetect {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "privdetect-model";
constexpr const char* kMappingFormat = "privdetect-mapping";

void dump_rec(const json& j, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string pad_close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  // Arrays of scalars stay on one line so matrices remain readable.
  auto scalar_array = [](const json& a) {
    for (const auto& e : a) {
      if (e.is_structured()) return false;
    }
    return true;
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        out += json(it.key()).dump();
        out += indent > 0 ? ": " : ":";
        dump_rec(it.value(), indent, depth + 1, out);
      }
      out += nl;
      out += pad_close;
      out += "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = scalar_array(j);
      out += "[";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        if (!flat) {
          out += nl;
          out += pad;
        }
        first = false;
        dump_rec(e, indent, depth + 1, out);
      }
      if (!flat) {
        out += nl;
        out += pad_close;
      }
      out += "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        // JSON has no infinities; encode as strings the reader understands.
        out += std::isnan(v) ? "\"nan\"" : (v > 0 ? "\"inf\"" : "\"-inf\"");
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      std::string s(buf);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      out += s;
      return;
    }
    default:
      out += j.dump();
  }
}

std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& field(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(at(path, key), "missing required field");
  return *it;
}

std::size_t positive_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw SchemaError(path, "expected a positive integer");
  }
  return v.get<std::size_t>();
}

double real(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  return v.get<double>();
}

std::vector<double> real_array(const json& v, const std::string& path, std::size_t n) {
  if (!v.is_array()) throw SchemaError(path, "expected an array");
  if (v.size() != n) {
    throw SchemaError(path, "expected " + std::to_string(n) + " entries, got " +
                                std::to_string(v.size()));
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = real(v[i], at(path, i));
  return out;
}

Distribution probability_vector(const json& v, const std::string& path, std::size_t n) {
  std::vector<double> m = real_array(v, path, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (m[i] < 0.0) throw SchemaError(at(path, i), "negative probability mass");
  }
  try {
    return Distribution(std::move(m));
  } catch (const ValidationError& e) {
    throw SchemaError(path, e.what());
  }
}

void check_format(const json& doc, const char* expected) {
  const json& f = field(doc, "$", "format");
  if (!f.is_string() || f.get<std::string>() != expected) {
    throw SchemaError("$.format", std::string("expected \"") + expected + "\"");
  }
  const json& v = field(doc, "$", "version");
  if (!v.is_number_integer() || v.get<int>() != 1) throw SchemaError("$.version", "unsupported");
}

}  // namespace

std::string dump_json(const json& doc, int indent) {
  std::string out;
  dump_rec(doc, indent, 0, out);
  out += "\n";
  return out;
}

json model_to_json(const JointModel& model) {
  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = 1;
  const bool factored = model.mode() == JointModel::Mode::kFactored;
  doc["mode"] = factored ? "factored" : "tensor";
  doc["s"] = model.num_sensors();
  doc["obs_alphabet"] = model.obs_alphabet();
  doc["quant_alphabet"] = model.quant_alphabet();
  doc["delta_floor"] = model.delta_floor();
  const auto& prior = model.hg_prior();
  doc["hg_prior"] = json::array({json::array({prior[hg_index(0, 0)], prior[hg_index(0, 1)]}),
                                 json::array({prior[hg_index(1, 0)], prior[hg_index(1, 1)]})});
  if (factored) {
    json sensors = json::array();
    for (const auto& sensor : model.sensor_conditionals()) {
      json rows = json::array();
      for (const auto& d : sensor) rows.push_back(d.vec());
      sensors.push_back(std::move(rows));
    }
    doc["sensor_conditionals"] = std::move(sensors);
  } else {
    const TensorLaw& law = model.tensor_law();
    json rows = json::array();
    for (std::size_t x = 0; x < law.num_x(); ++x) {
      rows.push_back(std::vector<double>(law.joint.begin() + static_cast<long>(x * 4),
                                         law.joint.begin() + static_cast<long>(x * 4 + 4)));
    }
    doc["joint"] = std::move(rows);
  }
  return doc;
}

JointModel model_from_json(const json& doc) {
  check_format(doc, kModelFormat);
  std::string mode = "factored";
  if (doc.contains("mode")) {
    if (!doc["mode"].is_string()) throw SchemaError("$.mode", "expected a string");
    mode = doc["mode"].get<std::string>();
  }
  const std::size_t s = positive_int(field(doc, "$", "s"), "$.s");
  const std::size_t nx = positive_int(field(doc, "$", "obs_alphabet"), "$.obs_alphabet");
  const std::size_t nz = positive_int(field(doc, "$", "quant_alphabet"), "$.quant_alphabet");
  std::optional<double> delta;
  if (doc.contains("delta_floor")) delta = real(doc["delta_floor"], "$.delta_floor");

  try {
    if (mode == "factored") {
      const json& hp = field(doc, "$", "hg_prior");
      if (!hp.is_array() || hp.size() != 2) throw SchemaError("$.hg_prior", "expected 2x2 array");
      std::vector<double> flat(4);
      for (std::size_t h = 0; h < 2; ++h) {
        const auto row = real_array(hp[h], at("$.hg_prior", h), 2);
        for (std::size_t g = 0; g < 2; ++g) {
          if (row[g] < 0.0) {
            throw SchemaError(at(at("$.hg_prior", h), g), "negative probability mass");
          }
          flat[hg_index(h, g)] = row[g];
        }
      }
      Distribution prior = [&] {
        try {
          return Distribution(flat);
        } catch (const ValidationError& e) {
          throw SchemaError("$.hg_prior", e.what());
        }
      }();
      const json& sc = field(doc, "$", "sensor_conditionals");
      const std::string scp = "$.sensor_conditionals";
      if (!sc.is_array() || sc.size() != s) {
        throw SchemaError(scp, "expected " + std::to_string(s) + " sensors");
      }
      std::vector<std::array<Distribution, 4>> conds(s);
      for (std::size_t t = 0; t < s; ++t) {
        const json& rows = sc[t];
        if (!rows.is_array() || rows.size() != 4) {
          throw SchemaError(at(scp, t), "expected 4 conditionals indexed by 2h+g");
        }
        for (std::size_t hg = 0; hg < 4; ++hg) {
          conds[t][hg] = probability_vector(rows[hg], at(at(scp, t), hg), nx);
        }
      }
      return JointModel::factored(std::move(prior), std::move(conds), nz, delta);
    }
    if (mode == "tensor") {
      const json& rows = field(doc, "$", "joint");
      const std::size_t n = checked_power(nx, s, kDefaultCap, "model tensor");
      if (!rows.is_array() || rows.size() != n) {
        throw SchemaError("$.joint", "expected " + std::to_string(n) + " rows");
      }
      TensorLaw law{s, nx, std::vector<double>(n * 4)};
      for (std::size_t x = 0; x < n; ++x) {
        const auto r = real_array(rows[x], at("$.joint", x), 4);
        for (std::size_t hg = 0; hg < 4; ++hg) {
          if (r[hg] < 0.0) throw SchemaError(at(at("$.joint", x), hg), "negative probability mass");
          law.joint[x * 4 + hg] = r[hg];
        }
      }
      return JointModel::tensor(std::move(law), nz, delta);
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const ValidationError& e) {
    throw SchemaError("$", e.what());
  }
  throw SchemaError("$.mode", "expected \"factored\" or \"tensor\"");
}

json mapping_to_json(const StochasticMapping& mapping) {
  json doc;
  doc["format"] = kMappingFormat;
  doc["version"] = 1;
  doc["s"] = mapping.num_sensors();
  doc["obs_alphabet"] = mapping.nx();
  doc["quant_alphabet"] = mapping.nz();
  doc["delta_floor"] = mapping.delta_floor();
  json sensors = json::array();
  for (const auto& q : mapping.sensors()) {
    json rows = json::array();
    for (std::size_t x = 0; x < q.nx(); ++x) {
      std::vector<double> row(q.nz());
      for (std::size_t z = 0; z < q.nz(); ++z) row[z] = q(x, z);
      rows.push_back(std::move(row));
    }
    sensors.push_back(std::move(rows));
  }
  doc["sensors"] = std::move(sensors);
  return doc;
}

StochasticMapping mapping_from_json(const json& doc) {
  check_format(doc, kMappingFormat);
  const std::size_t s = positive_int(field(doc, "$", "s"), "$.s");
  const std::size_t nx = positive_int(field(doc, "$", "obs_alphabet"), "$.obs_alphabet");
  const std::size_t nz = positive_int(field(doc, "$", "quant_alphabet"), "$.quant_alphabet");
  const double delta = doc.contains("delta_floor") ? real(doc["delta_floor"], "$.delta_floor") : 0.0;
  const json& sensors = field(doc, "$", "sensors");
  if (!sensors.is_array() || sensors.size() != s) {
    throw SchemaError("$.sensors", "expected " + std::to_string(s) + " sensors");
  }
  std::vector<Channel> channels;
  for (std::size_t t = 0; t < s; ++t) {
    const std::string p = at("$.sensors", t);
    const json& rows = sensors[t];
    if (!rows.is_array() || rows.size() != nx) {
      throw SchemaError(p, "expected " + std::to_string(nx) + " rows");
    }
    std::vector<double> q;
    q.reserve(nx * nz);
    for (std::size_t x = 0; x < nx; ++x) {
      const auto row = real_array(rows[x], at(p, x), nz);
      for (std::size_t z = 0; z < nz; ++z) {
        if (row[z] < 0.0) throw SchemaError(at(at(p, x), z), "negative probability mass");
      }
      q.insert(q.end(), row.begin(), row.end());
    }
    try {
      channels.emplace_back(nx, nz, std::move(q));
    } catch (const ValidationError& e) {
      throw SchemaError(p, e.what());
    }
  }
  try {
    return StochasticMapping(std::move(channels), delta);
  } catch (const ValidationError& e) {
    throw SchemaError("$", e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("parse error: ") + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

JointModel read_model(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

void write_model(const std::filesystem::path& path, const JointModel& model) {
  write_text_file(path, dump_json(model_to_json(model)));
}

StochasticMapping read_mapping(const std::filesystem::path& path) {
  return mapping_from_json(read_json_file(path));
}

void write_mapping(const std::filesystem::path& path, const StochasticMapping& mapping) {
  write_text_file(path, dump_json(mapping_to_json(mapping)));
}

}  // namespace privdetect
