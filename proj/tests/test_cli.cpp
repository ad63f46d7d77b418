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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "experiment.hpp"
#include "privdetect/error.hpp"
#include "privdetect/io.hpp"

namespace privdetect::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "privdetect");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("privdetect_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << cfg.dump(2);
  return p;
}

TEST(CliUsage, ExitCodes) {
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
  EXPECT_EQ(invoke({"optimize", "--r", "0.5", "--epsilon", "1"}).code, kExitUsage);
  EXPECT_EQ(invoke({"optimize", "--delta", "0.2"}).code, kExitUsage);  // no r / epsilon
  EXPECT_EQ(invoke({"optimize", "--r", "1.5"}).code, kExitUsage);
  EXPECT_EQ(invoke({"mfd", "--model", "/nonexistent.json", "--mapping", "/nonexistent.json",
                    "--delta", "0.1"})
                .code,
            kExitUsage);
  // theta/(1 - delta) > 1/2 in epsilon mode: a computational failure, not a usage error.
  const Outcome inf = invoke({"optimize", "--epsilon", "0.5", "--delta", "0.5"});
  EXPECT_EQ(inf.code, kExitFailure);
  EXPECT_NE(inf.err.find("exceeds 1/2"), std::string::npos);
}

TEST(CliCommands, OptimizeMfdValidateRoundTrip) {
  const fs::path dir = scratch_dir("roundtrip");
  const std::string model = (dir / "m.json").string();
  const std::string mapping = (dir / "q.json").string();
  ASSERT_EQ(invoke({"gen-model", "--sensors", "4", "--model-seed", "5", "-o", model}).code, kExitOk);
  EXPECT_EQ(read_model(model).num_sensors(), 4U);

  const Outcome opt = invoke({"optimize", "--model", model, "--r", "0.7", "--delta", "0.54",
                              "--out-mapping", mapping});
  ASSERT_EQ(opt.code, kExitOk) << opt.err;
  const json rep = json::parse(opt.out);
  EXPECT_TRUE(rep.contains("epsilon_achieved"));
  EXPECT_TRUE(rep.at("constraint_met").get<bool>());

  const Outcome mfd = invoke({"mfd", "--model", model, "--mapping", mapping, "--delta", "0.54"});
  ASSERT_EQ(mfd.code, kExitOk) << mfd.err;
  const json m = json::parse(mfd.out);
  for (const char* key : {"r_nominal", "r_mf", "z_under", "z_over", "A1", "A2"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_NEAR(m.at("r_mf").get<double>(), 0.46 * m.at("r_nominal").get<double>(), 1e-10);

  const Outcome ok = invoke({"validate", "--model", model, "--mapping", mapping, "--r", "0.7",
                             "--delta", "0.54"});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);

  // The identity mapping leaks far more than r = 0.99 allows.
  write_mapping(dir / "id.json", StochasticMapping::identity(4, 8));
  const std::string id_model = (dir / "m8.json").string();
  ASSERT_EQ(invoke({"gen-model", "--sensors", "4", "--nz", "8", "--model-seed", "5", "-o", id_model}).code,
            kExitOk);
  const Outcome bad = invoke({"validate", "--model", id_model, "--mapping", (dir / "id.json").string(),
                              "--r", "0.99"});
  EXPECT_EQ(bad.code, kExitFailure);
  EXPECT_NE(bad.out.find("FAIL privacy_constraint"), std::string::npos);
}

TEST(CliCommands, BoundsOrdered) {
  const Outcome o = invoke({"bounds", "--epsilon", "0.01", "--model-seed", "2"});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  std::istringstream in(o.out);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "epsilon,lower,upper,upper_constructive,i_xh_given_g");
  ASSERT_TRUE(std::getline(in, line));
  std::vector<double> v;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
  ASSERT_EQ(v.size(), 5U);
  EXPECT_LE(v[1], v[2]);
}

TEST(CliCommands, CompareAndExponents) {
  const Outcome c = invoke({"compare", "--r", "0.7", "--delta", "0.54", "--model-seed", "1"});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  EXPECT_EQ(c.out.rfind("metric,parameter,error_h,error_nominal,error_mf,i_xh_given_g", 0), 0U);
  EXPECT_NE(c.out.find("\ninfo_privacy,"), std::string::npos);
  EXPECT_NE(c.out.find("\nmaximal_leakage,"), std::string::npos);

  const Outcome e = invoke({"exponents", "--nx", "4", "--beta", "0", "0.02"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(std::count(e.out.begin(), e.out.end(), '\n'), 3);
}

TEST(ExperimentConfig, SchemaErrorsCarryFieldPaths) {
  auto path_of = [](const json& doc) -> std::string {
    try {
      parse_experiment(doc);
    } catch (const SchemaError& e) {
      return e.path();
    }
    return "";
  };
  EXPECT_EQ(path_of({{"grid", {{"r", {0.5}}}}}), "$.kind");
  EXPECT_EQ(path_of({{"kind", "nope"}, {"grid", {{"r", {0.5}}}}}), "$.kind");
  EXPECT_EQ(path_of({{"kind", "ratio-sweep"}}), "$.grid");
  EXPECT_EQ(path_of({{"kind", "ratio-sweep"}, {"grid", {{"r", json::array()}}}}), "$.grid.r");
  EXPECT_EQ(path_of({{"kind", "ratio-sweep"}, {"grid", {{"r", {0.5, 1.5}}}}}), "$.grid.r[1]");
  EXPECT_EQ(path_of({{"kind", "ratio-sweep"}, {"grid", {{"r", {0.5}}}}, {"sedes", {1}}}), "$.sedes");
  EXPECT_EQ(path_of({{"kind", "bounds-sweep"}, {"grid", {{"r", {0.5}}}}}), "$.grid.epsilon");
  EXPECT_EQ(path_of({{"kind", "ratio-sweep"},
                     {"grid", {{"r", {0.5}}}},
                     {"model", {{"file", "/does/not/exist.json"}}}}),
            "$.model.file");
  EXPECT_EQ(path_of({{"kind", "ratio-sweep"},
                     {"grid", {{"r", {0.5}}}},
                     {"model", {{"generate", {{"nx", "eight"}}}}}}),
            "$.model.generate.nx");

  const fs::path dir = scratch_dir("schema");
  const Outcome o = invoke({"run", write_config(dir, {{"kind", "ratio-sweep"}, {"grid", {{"r", {2.0}}}}}).string()});
  EXPECT_EQ(o.code, kExitUsage);
  EXPECT_NE(o.err.find("$.grid.r[0]"), std::string::npos);
}

TEST(Experiment, RatioSweepShapeAndReplay) {
  const fs::path dir = scratch_dir("ratio");
  json cfg = {{"kind", "ratio-sweep"},
              {"seeds", {3}},
              {"grid", {{"r", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}}, {"delta", {0.3, 0.54}}}},
              {"output", {{"dir", (dir / "a").string()}}}};
  const Outcome first = invoke({"run", write_config(dir, cfg).string()});
  ASSERT_EQ(first.code, kExitOk) << first.err;
  const fs::path csv = dir / "a" / "ratio-sweep.csv";
  const fs::path manifest = dir / "a" / "ratio-sweep.manifest.json";
  const std::string text = slurp(csv);
  const std::string header = text.substr(0, text.find('\n'));
  for (const char* col : {"error_h", "error_nominal", "error_mf"}) {
    EXPECT_NE(header.find(col), std::string::npos) << col;
  }
  const json man = read_json_file(manifest);
  EXPECT_EQ(man.at("csv").at("rows").get<std::size_t>(), 18U);
  EXPECT_FALSE(man.at("partial").get<bool>());
  EXPECT_NO_THROW(check_csv(text, schema_from_json(man.at("csv"))));
  EXPECT_EQ(invoke({"validate", "--csv", csv.string(), "--manifest", manifest.string()}).code, kExitOk);

  // Replaying the manifest reproduces the CSV byte for byte.
  const Outcome again = invoke({"run", manifest.string(), "-o", (dir / "b").string()});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  EXPECT_EQ(slurp(dir / "b" / "ratio-sweep.csv"), text);
}

TEST(Experiment, EveryKindMatchesItsSchema) {
  const fs::path dir = scratch_dir("kinds");
  const std::vector<json> configs = {
      {{"kind", "bounds-sweep"}, {"grid", {{"epsilon", {0.01, 0.5}}}}, {"optimize", false}},
      {{"kind", "corr-sweep"}, {"grid", {{"corr", {0.1, 0.5, 0.9}}, {"delta", {0.2}}}}},
      {{"kind", "exponent-sweep"},
       {"model", {{"generate", {{"nx", 4}}}}},
       {"grid", {{"beta", {0.0, 0.02}}}}},
      {{"kind", "cardinality-sweep"},
       {"model", {{"generate", {{"nx", 3}}}}},
       {"grid", {{"beta", {0.02}}, {"nz", {2, 4, 5}}}}},
      {{"kind", "compare"}, {"seeds", {0, 1}}, {"grid", {{"r", {0.7}}, {"delta", {0.0, 0.54}}}}},
  };
  for (json cfg : configs) {
    cfg["output"] = {{"dir", dir.string()}};
    const ExperimentConfig parsed = parse_experiment(cfg);
    const ExperimentOutputs res = run_experiment(parsed);
    const CsvSchema schema = experiment_schema(parsed);
    EXPECT_EQ(res.rows, schema.rows) << cfg.at("kind");
    EXPECT_NO_THROW(check_csv(slurp(res.csv), schema)) << cfg.at("kind");
    EXPECT_FALSE(res.partial) << cfg.at("kind");
    EXPECT_EQ(parse_experiment(read_json_file(res.manifest)).kind, parsed.kind);
  }
}

TEST(Experiment, TimeLimitFlagsPartialResults) {
  const fs::path dir = scratch_dir("limit");
  const ExperimentConfig cfg = parse_experiment({{"kind", "ratio-sweep"},
                                                 {"grid", {{"r", {0.3, 0.6}}}},
                                                 {"time_limit_seconds", 0.0},
                                                 {"output", {{"dir", dir.string()}}}});
  const ExperimentOutputs res = run_experiment(cfg);
  EXPECT_TRUE(res.partial);
  const std::string text = slurp(res.csv);
  EXPECT_NO_THROW(check_csv(text, experiment_schema(cfg)));
  EXPECT_NE(text.find(",skipped\n"), std::string::npos);
  EXPECT_TRUE(read_json_file(res.manifest).at("partial").get<bool>());
}

TEST(CsvSchema, RejectsMalformedTables) {
  CsvSchema s;
  s.columns = {"grid_index", "x", "ok", "status"};
  s.types = {ColumnType::kInt, ColumnType::kReal, ColumnType::kBool, ColumnType::kString};
  s.rows = 2;
  EXPECT_NO_THROW(check_csv("grid_index,x,ok,status\n0,0.5,true,ok\n1,nan,false,ok\n", s));
  EXPECT_THROW(check_csv("grid_index,y,ok,status\n0,0.5,true,ok\n1,1,false,ok\n", s), SchemaError);
  EXPECT_THROW(check_csv("grid_index,x,ok,status\n0,0.5,true,ok\n", s), SchemaError);
  EXPECT_THROW(check_csv("grid_index,x,ok,status\n0,abc,true,ok\n1,1,false,ok\n", s), SchemaError);
  EXPECT_THROW(check_csv("grid_index,x,ok,status\n0,1,yes,ok\n1,1,false,ok\n", s), SchemaError);
  EXPECT_THROW(check_csv("grid_index,x,ok,status\n1,1,true,ok\n0,1,false,ok\n", s), SchemaError);
  EXPECT_THROW(check_csv("grid_index,x,ok,status\n0,1,true\n1,1,false,ok\n", s), SchemaError);
}

}  // namespace
}  // namespace privdetect::cli
