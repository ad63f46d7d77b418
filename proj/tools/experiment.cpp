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

#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include "privdetect/asymptotic.hpp"
#include "privdetect/baselines.hpp"
#include "privdetect/bounds.hpp"
#include "privdetect/error.hpp"
#include "privdetect/io.hpp"
#include "privdetect/parallel.hpp"
#include "privdetect/pbpo.hpp"

#ifndef PRIVDETECT_VERSION
#define PRIVDETECT_VERSION "unknown"
#endif

namespace privdetect::cli {

using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "privdetect-manifest";

struct KindName {
  ExperimentKind kind;
  const char* name;
};
constexpr KindName kKinds[] = {
    {ExperimentKind::kBoundsSweep, "bounds-sweep"},
    {ExperimentKind::kRatioSweep, "ratio-sweep"},
    {ExperimentKind::kCorrSweep, "corr-sweep"},
    {ExperimentKind::kExponentSweep, "exponent-sweep"},
    {ExperimentKind::kCardinalitySweep, "cardinality-sweep"},
    {ExperimentKind::kCompare, "compare"},
};

// Field access with path tracking; unknown keys are rejected by finish().
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  std::optional<double> real(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return as_real(*v, at(key));
  }
  std::optional<std::size_t> count(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return as_count(*v, at(key));
  }
  std::optional<std::string> string(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw SchemaError(at(key), "expected a string");
    return v->get<std::string>();
  }
  std::optional<bool> boolean(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) throw SchemaError(at(key), "expected true or false");
    return v->get<bool>();
  }
  std::optional<std::vector<double>> reals(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    const json& a = non_empty_array(*v, at(key));
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.push_back(as_real(a[i], at(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
  std::optional<std::vector<std::size_t>> counts(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    const json& a = non_empty_array(*v, at(key));
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.push_back(as_count(a[i], at(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!used_.count(it.key())) throw SchemaError(at(it.key()), "unknown field");
    }
  }

 private:
  static double as_real(const json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected a number");
    return v.get<double>();
  }
  static std::size_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw SchemaError(path, "expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }
  static const json& non_empty_array(const json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path, "expected an array");
    if (v.empty()) throw SchemaError(path, "grid must be non-empty");
    return v;
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void require_range(const std::vector<double>& v, double lo, double hi, const std::string& path) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= lo && v[i] <= hi)) {
      throw SchemaError(path + "[" + std::to_string(i) + "]",
                        "value " + format_real(v[i]) + " outside [" + format_real(lo) + ", " +
                            format_real(hi) + "]");
    }
  }
}

// ---- columns -------------------------------------------------------------

struct Column {
  const char* name;
  ColumnType type;
};

std::vector<Column> columns_for(ExperimentKind kind) {
  using T = ColumnType;
  switch (kind) {
    case ExperimentKind::kBoundsSweep:
      return {{"grid_index", T::kInt},     {"seed", T::kInt},
              {"delta", T::kReal},         {"epsilon", T::kReal},
              {"lower", T::kReal},         {"upper", T::kReal},
              {"upper_constructive", T::kReal}, {"i_xh_given_g", T::kReal},
              {"pbpo_error_h", T::kReal},  {"status", T::kString}};
    case ExperimentKind::kRatioSweep:
      return {{"grid_index", T::kInt},    {"seed", T::kInt},          {"delta", T::kReal},
              {"r", T::kReal},            {"theta", T::kReal},        {"error_h", T::kReal},
              {"error_nominal", T::kReal}, {"error_mf", T::kReal},    {"epsilon_achieved", T::kReal},
              {"iterations", T::kInt},    {"converged", T::kBool},    {"status", T::kString}};
    case ExperimentKind::kCorrSweep:
      return {{"grid_index", T::kInt},     {"seed", T::kInt},         {"corr", T::kReal},
              {"delta", T::kReal},         {"r", T::kReal},           {"theta", T::kReal},
              {"error_h", T::kReal},       {"error_nominal", T::kReal}, {"error_mf", T::kReal},
              {"gap_h_nominal", T::kReal}, {"iterations", T::kInt},   {"converged", T::kBool},
              {"status", T::kString}};
    case ExperimentKind::kExponentSweep:
      return {{"grid_index", T::kInt}, {"seed", T::kInt},     {"beta", T::kReal},
              {"c_h", T::kReal},       {"c_g", T::kReal},     {"lambda_h", T::kReal},
              {"lambda_g", T::kReal},  {"support_size", T::kInt}, {"status", T::kString}};
    case ExperimentKind::kCardinalitySweep:
      return {{"grid_index", T::kInt}, {"seed", T::kInt}, {"nz", T::kInt},
              {"beta", T::kReal},      {"c_h", T::kReal}, {"c_g", T::kReal},
              {"support_size", T::kInt}, {"status", T::kString}};
    case ExperimentKind::kCompare:
      return {{"grid_index", T::kInt},  {"seed", T::kInt},          {"delta", T::kReal},
              {"r", T::kReal},          {"metric", T::kString},     {"anchor", T::kString},
              {"target", T::kReal},     {"parameter", T::kReal},    {"error_h", T::kReal},
              {"error_nominal", T::kReal}, {"error_mf", T::kReal},  {"i_xh_given_g", T::kReal},
              {"achieved", T::kReal},   {"matched", T::kBool},      {"status", T::kString}};
  }
  return {};
}

constexpr BaselineMetric kCompareMetrics[] = {BaselineMetric::kInfoPrivacy, BaselineMetric::kAvgLeakage,
                                              BaselineMetric::kLocalDp, BaselineMetric::kMaximalLeakage};

// ---- grid ----------------------------------------------------------------

struct Point {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double a = 0.0, b = 0.0, c = 0.0;  // kind-specific axis values
  std::size_t n = 0;
};

std::vector<Point> grid_points(const ExperimentConfig& c) {
  std::vector<Point> pts;
  auto push = [&](Point p) {
    p.index = pts.size();
    pts.push_back(p);
  };
  for (std::uint64_t seed : c.seeds) {
    switch (c.kind) {
      case ExperimentKind::kBoundsSweep:
        for (double d : c.delta)
          for (double e : c.epsilon) push({0, seed, d, e, 0.0, 0});
        break;
      case ExperimentKind::kRatioSweep:
      case ExperimentKind::kCompare:
        for (double d : c.delta)
          for (double r : c.r) push({0, seed, d, r, 0.0, 0});
        break;
      case ExperimentKind::kCorrSweep:
        for (double rho : c.corr)
          for (double d : c.delta)
            for (double r : c.r) push({0, seed, rho, d, r, 0});
        break;
      case ExperimentKind::kExponentSweep:
        for (double beta : c.beta) push({0, seed, beta, 0.0, 0.0, 0});
        break;
      case ExperimentKind::kCardinalitySweep:
        for (std::size_t nz : c.nz)
          for (double beta : c.beta) push({0, seed, beta, 0.0, 0.0, nz});
        break;
    }
  }
  return pts;
}

using Row = std::vector<std::string>;

std::string cell(double v) { return format_real(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(std::uint64_t v, int) { return std::to_string(v); }
std::string cell(bool v) { return v ? "true" : "false"; }

Row id_cells(const ExperimentConfig& c, const Point& p) {
  Row row{cell(p.index), cell(p.seed, 0)};
  switch (c.kind) {
    case ExperimentKind::kBoundsSweep:
    case ExperimentKind::kRatioSweep:
    case ExperimentKind::kCompare:
      row.push_back(cell(p.a));
      row.push_back(cell(p.b));
      break;
    case ExperimentKind::kCorrSweep:
      row.push_back(cell(p.a));
      row.push_back(cell(p.b));
      row.push_back(cell(p.c));
      break;
    case ExperimentKind::kExponentSweep:
      row.push_back(cell(p.a));
      break;
    case ExperimentKind::kCardinalitySweep:
      row.push_back(cell(p.n));
      row.push_back(cell(p.a));
      break;
  }
  return row;
}

// Row with identifiers set, defaults elsewhere and the given status.
Row blank_row(const ExperimentConfig& c, const Point& p, const std::string& status,
              const std::string& metric = "") {
  const auto cols = columns_for(c.kind);
  Row row = id_cells(c, p);
  if (c.kind == ExperimentKind::kCompare) row.push_back(metric);
  for (std::size_t i = row.size(); i + 1 < cols.size(); ++i) {
    switch (cols[i].type) {
      case ColumnType::kInt: row.push_back("0"); break;
      case ColumnType::kReal: row.push_back("nan"); break;
      case ColumnType::kBool: row.push_back("false"); break;
      case ColumnType::kString: row.push_back(""); break;
    }
  }
  row.push_back(status);
  return row;
}

PbpoConfig pbpo_config(const ExperimentConfig& c, std::uint64_t seed, double delta) {
  PbpoConfig cfg;
  cfg.delta = delta;
  cfg.seed = seed;
  cfg.xi = c.pbpo.xi;
  cfg.max_iters = c.pbpo.max_iters;
  cfg.noise_scale = c.pbpo.noise_scale;
  cfg.cap = c.cap;
  return cfg;
}

struct PbpoPoint {
  PbpoResult res;
  FusionErrors errors;
};

PbpoPoint run_pbpo(const JointModel& m, const PbpoConfig& cfg) {
  PbpoPoint out{pbpo_optimize(m, cfg), {}};
  out.errors = evaluate_errors(push_forward(m, out.res.mapping, cfg.cap), cfg.delta, cfg.seed);
  return out;
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& c) : c_(c) {
    if (c_.model_file) file_model_ = read_model(*c_.model_file);
  }

  JointModel model(std::uint64_t seed, std::optional<double> corr = std::nullopt) const {
    if (file_model_) return *file_model_;
    GenerateParams g = c_.generate;
    if (corr) g.corr = *corr;
    return g.generate(seed, c_.cap);
  }

  std::vector<Row> evaluate(const Point& p) const {
    const Row ids = id_cells(c_, p);
    auto with = [&ids](std::initializer_list<std::string> rest) {
      Row row = ids;
      row.insert(row.end(), rest.begin(), rest.end());
      return row;
    };
    switch (c_.kind) {
      case ExperimentKind::kBoundsSweep: {
        const JointModel m = model(p.seed);
        BoundOptions bo;
        bo.delta = p.a;
        bo.n_samples = c_.samples;
        bo.seed = p.seed;
        bo.cap = c_.cap;
        const BoundReport rep = compute_bounds(m, p.b, bo);
        double err = std::nan("");
        std::string status = "ok";
        if (c_.optimize) {
          PbpoConfig cfg = pbpo_config(c_, p.seed, p.a);
          cfg.epsilon = p.b;
          try {
            err = pbpo_optimize(m, cfg).error;
          } catch (const InfeasibleError&) {
            status = "infeasible";
          }
        }
        return {with({cell(rep.lower), cell(rep.upper), cell(rep.upper_constructive),
                      cell(rep.i_xh_given_g), cell(err), status})};
      }
      case ExperimentKind::kRatioSweep: {
        const JointModel m = model(p.seed);
        PbpoConfig cfg = pbpo_config(c_, p.seed, p.a);
        cfg.r = p.b;
        const PbpoPoint pt = run_pbpo(m, cfg);
        const PrivacyReport rep =
            validate_privacy(m, pt.res.mapping, privacy_spec(m, cfg), p.seed, cfg.cap);
        return {with({cell(pt.res.trace.theta), cell(pt.res.error), cell(pt.errors.nominal),
                      cell(pt.errors.mf), cell(rep.epsilon_achieved),
                      cell(pt.res.trace.iterations.size()), cell(pt.res.trace.converged), "ok"})};
      }
      case ExperimentKind::kCorrSweep: {
        const JointModel m = model(p.seed, p.a);
        PbpoConfig cfg = pbpo_config(c_, p.seed, p.b);
        cfg.r = p.c;
        const PbpoPoint pt = run_pbpo(m, cfg);
        return {with({cell(pt.res.trace.theta), cell(pt.res.error), cell(pt.errors.nominal),
                      cell(pt.errors.mf), cell(pt.res.error - pt.errors.nominal),
                      cell(pt.res.trace.iterations.size()), cell(pt.res.trace.converged), "ok"})};
      }
      case ExperimentKind::kExponentSweep: {
        AsymptoticOptions ao;
        const AsymptoticSolution sol = solve_asymptotic(model(p.seed), p.a, ao);
        return {with({cell(sol.c_h), cell(sol.c_g), cell(sol.lambda_h), cell(sol.lambda_g),
                      cell(sol.support_size()), "ok"})};
      }
      case ExperimentKind::kCardinalitySweep: {
        AsymptoticOptions ao;
        ao.reduce_alphabet = false;  // the sweep is meant to show the flatness
        const JointModel m = model(p.seed).with_design(p.n, std::nullopt);
        const AsymptoticSolution sol = solve_asymptotic(m, p.a, ao);
        return {with({cell(sol.c_h), cell(sol.c_g), cell(sol.support_size()), "ok"})};
      }
      case ExperimentKind::kCompare:
        return compare_rows(p);
    }
    return {};
  }

 private:
  std::vector<Row> compare_rows(const Point& p) const {
    const JointModel m = model(p.seed);
    PbpoConfig cfg = pbpo_config(c_, p.seed, p.a);
    cfg.r = p.b;
    CompareOptions co;
    co.tolerance = c_.tolerance;
    if (c_.anchor) co.anchor = *c_.anchor == "mf" ? Anchor::kMostFavorable : Anchor::kNominal;
    const ComparisonTable t = calibrate_and_compare(m, cfg, co);
    std::vector<Row> rows;
    for (BaselineMetric metric : kCompareMetrics) {
      auto it = std::find_if(t.rows.begin(), t.rows.end(),
                             [metric](const CalibratedRow& r) { return r.result.metric == metric; });
      if (it == t.rows.end()) {
        Row row = blank_row(c_, p, "not_applicable", to_string(metric));
        row[5] = to_string(t.anchor);
        row[6] = cell(t.target);
        row[11] = cell(t.i_xh_given_g);
        rows.push_back(std::move(row));
        continue;
      }
      const BaselineResult& res = it->result;
      Row row = id_cells(c_, p);
      for (std::string v :
           {std::string(to_string(metric)), std::string(to_string(t.anchor)), cell(t.target),
            cell(res.parameter), cell(res.error_h), cell(res.error_nominal), cell(res.error_mf),
            cell(t.i_xh_given_g), cell(it->achieved), cell(it->matched),
            std::string(it->matched ? "ok" : "unmatched")}) {
        row.push_back(std::move(v));
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

  const ExperimentConfig& c_;
  std::optional<JointModel> file_model_;
};

std::string join_csv(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  line += '\n';
  return line;
}

bool is_int(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  return true;
}

bool is_real(const std::string& s) {
  if (s == "nan" || s == "inf" || s == "-inf") return true;
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

const char* type_name(ColumnType t) {
  switch (t) {
    case ColumnType::kInt: return "int";
    case ColumnType::kReal: return "real";
    case ColumnType::kString: return "string";
    case ColumnType::kBool: return "bool";
  }
  return "?";
}

ColumnType type_from_name(const std::string& s, const std::string& path) {
  if (s == "int") return ColumnType::kInt;
  if (s == "real") return ColumnType::kReal;
  if (s == "string") return ColumnType::kString;
  if (s == "bool") return ColumnType::kBool;
  throw SchemaError(path, "unknown column type '" + s + "'");
}

json generate_to_json(const GenerateParams& g) {
  json j{{"sensors", g.sensors}, {"nx", g.nx},          {"nz", g.nz},
         {"corr", g.corr},       {"concentration", g.concentration},
         {"alpha_floor", g.alpha_floor}, {"p_h1", g.p_h1}, {"p_g1", g.p_g1}};
  if (g.mi_target) j["mi_target"] = *g.mi_target;
  if (g.delta_floor) j["delta_floor"] = *g.delta_floor;
  return j;
}

}  // namespace

const char* to_string(ExperimentKind kind) noexcept {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw SchemaError("$.kind", "unknown experiment kind '" + name + "'");
}

Profile profile_by_name(const std::string& name) {
  if (name == "desk") return {3, 8, 2};
  if (name == "full") return {4, 16, 2};
  throw SchemaError("$.profile", "unknown profile '" + name + "' (expected desk or full)");
}

JointModel GenerateParams::generate(std::uint64_t seed, std::size_t cap) const {
  GenerateOptions o;
  o.quant_alphabet = nz;
  o.delta_floor = delta_floor;
  o.concentration = concentration;
  o.alpha_floor = alpha_floor;
  o.p_h1 = p_h1;
  o.p_g1 = p_g1;
  o.cap = cap;
  return generate_model(sensors, nx, corr, mi_target, seed, o);
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ExperimentConfig parse_experiment(const json& input) {
  const json* doc = &input;
  if (input.is_object() && input.value("format", "") == kManifestFormat) {
    if (!input.contains("config")) throw SchemaError("$.config", "manifest without config echo");
    doc = &input.at("config");
  }
  Reader top(*doc, "$");
  ExperimentConfig c;
  const auto kind = top.string("kind");
  if (!kind) throw SchemaError("$.kind", "missing required field");
  c.kind = parse_kind(*kind);
  c.stem = to_string(c.kind);

  const Profile prof = profile_by_name(top.string("profile").value_or("desk"));
  c.generate.sensors = prof.sensors;
  c.generate.nx = prof.nx;
  c.generate.nz = prof.nz;

  if (const json* m = top.find("model")) {
    Reader mr(*m, "$.model");
    const auto file = mr.string("file");
    const json* gen = mr.find("generate");
    if (file && gen) throw SchemaError("$.model", "give either file or generate, not both");
    if (file) {
      c.model_file = *file;
      if (!std::filesystem::exists(*c.model_file)) {
        throw SchemaError("$.model.file", "file '" + *file + "' does not exist");
      }
    }
    if (gen) {
      Reader g(*gen, "$.model.generate");
      GenerateParams& p = c.generate;
      p.sensors = g.count("sensors").value_or(p.sensors);
      p.nx = g.count("nx").value_or(p.nx);
      p.nz = g.count("nz").value_or(p.nz);
      p.corr = g.real("corr").value_or(p.corr);
      p.mi_target = g.real("mi_target");
      p.delta_floor = g.real("delta_floor");
      p.concentration = g.real("concentration").value_or(p.concentration);
      p.alpha_floor = g.real("alpha_floor").value_or(p.alpha_floor);
      p.p_h1 = g.real("p_h1").value_or(p.p_h1);
      p.p_g1 = g.real("p_g1").value_or(p.p_g1);
      g.finish();
      if (p.sensors < 1 || p.nx < 2 || p.nz < 2) {
        throw SchemaError("$.model.generate", "need sensors >= 1, nx >= 2, nz >= 2");
      }
      if (!(p.corr > -1.0 && p.corr < 1.0)) {
        throw SchemaError("$.model.generate.corr", "expected a value in (-1, 1)");
      }
    }
    mr.finish();
  }

  if (const auto seeds = top.counts("seeds")) c.seeds.assign(seeds->begin(), seeds->end());

  if (const json* pb = top.find("pbpo")) {
    Reader pr(*pb, "$.pbpo");
    c.pbpo.xi = pr.real("xi").value_or(c.pbpo.xi);
    c.pbpo.max_iters = pr.count("max_iters").value_or(c.pbpo.max_iters);
    c.pbpo.noise_scale = pr.real("noise_scale");
    pr.finish();
  }

  const json* grid = top.find("grid");
  if (!grid) throw SchemaError("$.grid", "missing required field");
  Reader gr(*grid, "$.grid");
  auto need = [&gr](std::optional<std::vector<double>> v, const char* key) {
    if (!v) throw SchemaError(gr.at(key), "missing required field");
    return *v;
  };
  if (auto d = gr.reals("delta")) c.delta = *d;
  require_range(c.delta, 0.0, 0.999999, "$.grid.delta");
  switch (c.kind) {
    case ExperimentKind::kBoundsSweep:
      c.epsilon = need(gr.reals("epsilon"), "epsilon");
      require_range(c.epsilon, 0.0, 1e300, "$.grid.epsilon");
      break;
    case ExperimentKind::kRatioSweep:
    case ExperimentKind::kCompare:
      c.r = need(gr.reals("r"), "r");
      require_range(c.r, 0.0, 1.0, "$.grid.r");
      break;
    case ExperimentKind::kCorrSweep:
      c.corr = need(gr.reals("corr"), "corr");
      require_range(c.corr, -0.999999, 0.999999, "$.grid.corr");
      c.r = gr.reals("r").value_or(std::vector<double>{0.7});
      require_range(c.r, 0.0, 1.0, "$.grid.r");
      if (c.model_file) throw SchemaError("$.model.file", "corr-sweep needs a generated model");
      break;
    case ExperimentKind::kExponentSweep:
      c.beta = need(gr.reals("beta"), "beta");
      require_range(c.beta, 0.0, 1e300, "$.grid.beta");
      break;
    case ExperimentKind::kCardinalitySweep: {
      c.beta = need(gr.reals("beta"), "beta");
      require_range(c.beta, 0.0, 1e300, "$.grid.beta");
      const auto nz = gr.counts("nz");
      if (!nz) throw SchemaError("$.grid.nz", "missing required field");
      for (std::size_t i = 0; i < nz->size(); ++i) {
        if ((*nz)[i] < 2) throw SchemaError("$.grid.nz[" + std::to_string(i) + "]", "expected >= 2");
      }
      c.nz = *nz;
      break;
    }
  }
  gr.finish();

  c.optimize = top.boolean("optimize").value_or(c.optimize);
  c.samples = top.count("samples").value_or(c.samples);
  c.anchor = top.string("anchor");
  if (c.anchor && *c.anchor != "nominal" && *c.anchor != "mf") {
    throw SchemaError("$.anchor", "expected nominal or mf");
  }
  c.tolerance = top.real("tolerance").value_or(c.tolerance);
  c.time_limit_seconds = top.real("time_limit_seconds");
  c.cap = top.count("cap").value_or(c.cap);

  if (const json* out = top.find("output")) {
    Reader orr(*out, "$.output");
    if (auto dir = orr.string("dir")) c.output_dir = *dir;
    if (auto stem = orr.string("stem")) c.stem = *stem;
    orr.finish();
  }
  top.finish();
  return c;
}

json experiment_to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  if (c.model_file) {
    j["model"] = {{"file", c.model_file->string()}};
  } else {
    j["model"] = {{"generate", generate_to_json(c.generate)}};
  }
  j["seeds"] = c.seeds;
  json pb{{"xi", c.pbpo.xi}, {"max_iters", c.pbpo.max_iters}};
  if (c.pbpo.noise_scale) pb["noise_scale"] = *c.pbpo.noise_scale;
  j["pbpo"] = pb;
  json grid{{"delta", c.delta}};
  switch (c.kind) {
    case ExperimentKind::kBoundsSweep: grid["epsilon"] = c.epsilon; break;
    case ExperimentKind::kRatioSweep:
    case ExperimentKind::kCompare: grid["r"] = c.r; break;
    case ExperimentKind::kCorrSweep:
      grid["corr"] = c.corr;
      grid["r"] = c.r;
      break;
    case ExperimentKind::kExponentSweep: grid["beta"] = c.beta; break;
    case ExperimentKind::kCardinalitySweep:
      grid["beta"] = c.beta;
      grid["nz"] = c.nz;
      break;
  }
  j["grid"] = grid;
  j["optimize"] = c.optimize;
  j["samples"] = c.samples;
  if (c.anchor) j["anchor"] = *c.anchor;
  j["tolerance"] = c.tolerance;
  if (c.time_limit_seconds) j["time_limit_seconds"] = *c.time_limit_seconds;
  j["cap"] = c.cap;
  j["output"] = {{"dir", c.output_dir.string()}, {"stem", c.stem}};
  return j;
}

CsvSchema experiment_schema(const ExperimentConfig& config) {
  CsvSchema s;
  for (const Column& col : columns_for(config.kind)) {
    s.columns.emplace_back(col.name);
    s.types.push_back(col.type);
  }
  const std::size_t per_point = config.kind == ExperimentKind::kCompare ? std::size(kCompareMetrics) : 1;
  s.rows = grid_points(config).size() * per_point;
  return s;
}

void check_csv(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : l) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    cells.push_back(cur);
    return cells;
  };
  if (!std::getline(in, line)) throw SchemaError("csv:1", "missing header");
  ++lineno;
  if (split(line) != schema.columns) throw SchemaError("csv:1", "header does not match the schema");
  const auto gi = std::find(schema.columns.begin(), schema.columns.end(), "grid_index");
  const std::size_t gi_col = static_cast<std::size_t>(gi - schema.columns.begin());
  long long last_index = -1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "csv:" + std::to_string(lineno);
    const auto cells = split(line);
    if (cells.size() != schema.columns.size()) {
      throw SchemaError(where, "expected " + std::to_string(schema.columns.size()) + " cells, got " +
                                   std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string& v = cells[i];
      bool ok = true;
      switch (schema.types[i]) {
        case ColumnType::kInt: ok = is_int(v); break;
        case ColumnType::kReal: ok = is_real(v); break;
        case ColumnType::kBool: ok = v == "true" || v == "false"; break;
        case ColumnType::kString: ok = v.find('"') == std::string::npos; break;
      }
      if (!ok) {
        throw SchemaError(where + "." + schema.columns[i],
                          "'" + v + "' is not a valid " + type_name(schema.types[i]));
      }
    }
    if (gi != schema.columns.end()) {
      const long long idx = std::stoll(cells[gi_col]);
      if (idx < last_index) throw SchemaError(where, "rows are not ordered by grid_index");
      last_index = idx;
    }
    ++rows;
  }
  if (rows != schema.rows) {
    throw SchemaError("csv", "expected " + std::to_string(schema.rows) + " rows, got " +
                                 std::to_string(rows));
  }
}

json schema_to_json(const CsvSchema& schema) {
  json types = json::array();
  for (ColumnType t : schema.types) types.push_back(type_name(t));
  return {{"columns", schema.columns}, {"types", types}, {"rows", schema.rows}};
}

CsvSchema schema_from_json(const json& doc) {
  Reader r(doc, "$.csv");
  CsvSchema s;
  const json* cols = r.find("columns");
  const json* types = r.find("types");
  const auto rows = r.count("rows");
  r.find("file");
  if (!cols || !types || !rows) throw SchemaError("$.csv", "needs columns, types and rows");
  if (!cols->is_array() || !types->is_array() || cols->size() != types->size()) {
    throw SchemaError("$.csv", "columns and types must be arrays of equal length");
  }
  for (std::size_t i = 0; i < cols->size(); ++i) {
    if (!(*cols)[i].is_string() || !(*types)[i].is_string()) {
      throw SchemaError("$.csv.columns[" + std::to_string(i) + "]", "expected a string");
    }
    s.columns.push_back((*cols)[i].get<std::string>());
    s.types.push_back(type_from_name((*types)[i].get<std::string>(),
                                     "$.csv.types[" + std::to_string(i) + "]"));
  }
  s.rows = *rows;
  r.finish();
  return s;
}

ExperimentOutputs run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const Runner runner(config);
  const std::vector<Point> pts = grid_points(config);
  std::vector<std::vector<Row>> rows(pts.size());
  std::vector<double> wall(pts.size(), 0.0);

  parallel_for(pts.size(), Exec::kParallel, [&](std::size_t i) {
    const Point& p = pts[i];
    auto failed = [&](const std::string& status) {
      if (config.kind != ExperimentKind::kCompare) return std::vector<Row>{blank_row(config, p, status)};
      std::vector<Row> out;
      for (BaselineMetric m : kCompareMetrics) out.push_back(blank_row(config, p, status, to_string(m)));
      return out;
    };
    if (config.time_limit_seconds && elapsed() > *config.time_limit_seconds) {
      rows[i] = failed("skipped");
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rows[i] = runner.evaluate(p);
    } catch (const InfeasibleError&) {
      rows[i] = failed("infeasible");
    } catch (const CapExceededError&) {
      rows[i] = failed("cap_exceeded");
    }
    wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  const CsvSchema schema = experiment_schema(config);
  std::string csv = join_csv(schema.columns);
  std::size_t n_rows = 0;
  json status_counts = json::object();
  for (const auto& point_rows : rows) {
    for (const Row& row : point_rows) {
      csv += join_csv(row);
      ++n_rows;
      const std::string& st = row.back();
      status_counts[st] = status_counts.value(st, 0) + 1;
    }
  }
  check_csv(csv, schema);
  const bool partial = status_counts.contains("skipped") || status_counts.contains("cap_exceeded");

  ExperimentOutputs out;
  std::filesystem::create_directories(config.output_dir);
  out.csv = config.output_dir / (config.stem + ".csv");
  out.manifest = config.output_dir / (config.stem + ".manifest.json");
  out.rows = n_rows;
  out.partial = partial;
  write_text_file(out.csv, csv);

  json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = PRIVDETECT_VERSION;
  manifest["kind"] = to_string(config.kind);
  manifest["config"] = experiment_to_json(config);
  manifest["seeds"] = config.seeds;
  json csv_info = schema_to_json(schema);
  csv_info["file"] = out.csv.filename().string();
  manifest["csv"] = csv_info;
  manifest["partial"] = partial;
  manifest["status_counts"] = status_counts;
  manifest["threads"] = thread_count();
  manifest["build"] = {{"compiler", __VERSION__},
                       {"cxx_standard", static_cast<long long>(__cplusplus)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  manifest["point_wall_seconds"] = wall;
  manifest["wall_seconds"] = elapsed();
  write_text_file(out.manifest, dump_json(manifest));
  return out;
}

}  // namespace privdetect::cli
