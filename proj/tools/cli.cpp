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

#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "experiment.hpp"
#include "privdetect/asymptotic.hpp"
#include "privdetect/baselines.hpp"
#include "privdetect/bounds.hpp"
#include "privdetect/error.hpp"
#include "privdetect/io.hpp"
#include "privdetect/parallel.hpp"
#include "privdetect/pbpo.hpp"
#include "privdetect/uncertainty.hpp"

namespace privdetect::cli {

using nlohmann::json;

namespace {

// A model read from --model, or generated from the remaining flags.
struct ModelArgs {
  std::string file;
  std::string profile = "desk";
  std::size_t sensors = 0, nx = 0, nz = 0;  // 0: take from the profile
  double corr = 0.5;
  double mi_target = 0.0;
  double delta_floor = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* mi_opt = nullptr;
  CLI::Option* floor_opt = nullptr;

  void add(CLI::App* app, bool allow_file = true) {
    if (allow_file) {
      app->add_option("--model", file, "Model JSON file (otherwise a model is generated)")
          ->check(CLI::ExistingFile);
    }
    app->add_option("--profile", profile, "Generated-model scale: desk (s=3, |X|=8) or full (s=4, |X|=16)")
        ->check(CLI::IsMember({"desk", "full"}));
    app->add_option("--sensors", sensors, "Number of sensors s")->check(CLI::PositiveNumber);
    app->add_option("--nx", nx, "Observation alphabet |X|")->check(CLI::Range(2, 1 << 16));
    app->add_option("--nz", nz, "Quantization alphabet |Z|")->check(CLI::Range(2, 1 << 16));
    app->add_option("--corr", corr, "Correlation between H and G")->check(CLI::Range(-0.999999, 0.999999));
    mi_opt = app->add_option("--mi-target", mi_target, "Target I(X;H|G) in nats");
    floor_opt = app->add_option("--delta-floor", delta_floor, "Column floor of each sensor mapping");
    app->add_option("--model-seed", seed, "Seed of the generated model");
  }

  JointModel load() const {
    if (!file.empty()) return read_model(file);
    const Profile p = profile_by_name(profile);
    GenerateParams g;
    g.sensors = sensors ? sensors : p.sensors;
    g.nx = nx ? nx : p.nx;
    g.nz = nz ? nz : p.nz;
    g.corr = corr;
    if (mi_opt->count()) g.mi_target = mi_target;
    if (floor_opt->count()) g.delta_floor = delta_floor;
    return g.generate(seed);
  }
};

struct PrivacyArgs {
  double r = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  CLI::Option* r_opt = nullptr;
  CLI::Option* eps_opt = nullptr;

  void add(CLI::App* app) {
    r_opt = app->add_option("--r", r, "Threshold ratio r in [0, 1]")->check(CLI::Range(0.0, 1.0));
    eps_opt = app->add_option("--epsilon", epsilon, "Information-privacy budget")
                  ->check(CLI::NonNegativeNumber);
    r_opt->excludes(eps_opt);
    app->add_option("--delta", delta, "Contamination level delta in [0, 1)")->check(CLI::Range(0.0, 0.999999));
  }
  bool given() const { return r_opt->count() || eps_opt->count(); }
  void apply(PbpoConfig& c) const {
    c.delta = delta;
    if (r_opt->count()) c.r = r;
    if (eps_opt->count()) c.epsilon = epsilon;
  }
};

std::string phi_string(const DeterministicMapping& phi) {
  std::string s;
  for (std::size_t x = 0; x < phi.nx(); ++x) {
    if (x) s += '-';
    s += std::to_string(phi.table[x]);
  }
  return s;
}

void emit(std::ostream& out, const json& j) { out << dump_json(j); }

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string line;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) line += ',';
    line += c;
    first = false;
  }
  return line + '\n';
}

class Checks {
 public:
  explicit Checks(std::ostream& out) : out_(out) {}
  void add(const std::string& name, bool ok, const std::string& detail) {
    out_ << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    failed_ |= !ok;
  }
  bool failed() const { return failed_; }

 private:
  std::ostream& out_;
  bool failed_ = false;
};

std::string num(double v) { return format_real(v); }

int validate_pair(const JointModel& model, const StochasticMapping& mapping, const PrivacyArgs& pa,
                  std::size_t samples, std::uint64_t seed, std::ostream& out) {
  Checks checks(out);
  const bool shape = mapping.num_sensors() == model.num_sensors() &&
                     mapping.nx() == model.obs_alphabet() && mapping.nz() == model.quant_alphabet();
  checks.add("shape", shape,
             "mapping s=" + std::to_string(mapping.num_sensors()) + " |X|=" + std::to_string(mapping.nx()) +
                 " |Z|=" + std::to_string(mapping.nz()));
  if (!shape) return kExitFailure;

  double floor = std::numeric_limits<double>::infinity();
  for (const Channel& q : mapping.sensors()) floor = std::min(floor, q.min_column_sum());
  checks.add("column_floor", floor >= model.delta_floor() - kNormTol,
             "min column sum " + num(floor) + " vs floor " + num(model.delta_floor()));

  const FusionLaw law = push_forward(model, mapping);
  double total = 0.0;
  for (double v : law.joint) total += v;
  const Distribution ph = law.p_h();
  const Distribution pg = law.p_g();
  const double marg = std::max({std::abs(ph[1] - model.p_h()[1]), std::abs(pg[1] - model.p_g()[1])});
  checks.add("fusion_law", std::abs(total - 1.0) <= 1e-12 && marg <= 1e-12,
             "total " + num(total) + ", marginal drift " + num(marg));

  const FusionRule rule = bayes_fusion_rule(law);
  const double via_rule = fusion_error(law, rule);
  const double bayes = bayes_error(ph, law.z_given_h());
  checks.add("bayes_rule", std::abs(via_rule - bayes) <= 1e-12,
             "P(gamma != H) " + num(via_rule) + " vs Bayes error " + num(bayes));

  const ConditionalTable zg = law.z_given_g();
  const MfdResult mfd = build_mfd(zg, pa.delta, seed);
  checks.add("mfd_identity", std::abs(mfd.r_mf - (1.0 - pa.delta) * mfd.r_nominal) <= 1e-10,
             "r_mf " + num(mfd.r_mf) + ", (1-delta) r_nominal " + num((1.0 - pa.delta) * mfd.r_nominal));

  const auto hyps = sample_uncertainty_set(zg, pa.delta, samples, seed, pg);
  double worst = 1.0;
  double worst_witness = 0.0;
  bool members = true;
  for (const auto& h : hyps) {
    worst = std::min(worst, min_avg_type12_error(h.cond));
    const auto w = membership_witness(zg, h.cond, pa.delta);
    if (!w) {
      members = false;
      continue;
    }
    for (const auto& row : *w) {
      for (double v : row) worst_witness = std::min(worst_witness, v);
    }
  }
  checks.add("mfd_minimal", worst >= mfd.r_mf - 1e-9,
             "min over " + std::to_string(hyps.size()) + " sampled hypotheses " + num(worst) +
                 " vs r_mf " + num(mfd.r_mf));
  checks.add("samples_in_set", members && worst_witness >= -1e-12,
             "most negative witness entry " + num(worst_witness));

  if (pa.given()) {
    PbpoConfig cfg;
    pa.apply(cfg);
    const UncertaintySpec spec = privacy_spec(model, cfg);
    const PrivacyReport rep = validate_privacy(model, mapping, spec, seed);
    checks.add("privacy_constraint", rep.slack >= -1e-9,
               "min avg error " + num(rep.min_avg_err_nominal) + " vs theta/(1-delta) " +
                   num(rep.theta_eff));
    double eps_max = 0.0;
    for (const auto& h : hyps) eps_max = std::max(eps_max, info_privacy_budget_on_support(h.cond, pg));
    eps_max = std::max(eps_max, rep.epsilon_achieved);
    checks.add("relaxation_sound", !rep.constraint_met || eps_max <= rep.epsilon_implied + 1e-6,
               "max sampled budget " + num(eps_max) + " vs implied epsilon " + num(rep.epsilon_implied));
  }
  return checks.failed() ? kExitFailure : kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_threads_from_env();
  CLI::App app{"Privacy-preserving decentralized detection: mapping design, bounds and experiments",
               "privdetect"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PRIVDETECT_VERSION);
  std::function<int()> action;

  // gen-model
  ModelArgs gen_args;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-model", "Generate a random joint model");
  gen_args.add(gen, false);
  gen->add_option("-o,--out", gen_out, "Output file (default: stdout)");
  gen->callback([&] {
    action = [&] {
      const JointModel m = gen_args.load();
      if (gen_out.empty()) {
        emit(out, model_to_json(m));
      } else {
        write_model(gen_out, m);
      }
      return kExitOk;
    };
  });

  // optimize
  ModelArgs opt_model;
  PrivacyArgs opt_priv;
  std::uint64_t opt_seed = 0;
  PbpoConfig opt_cfg;
  bool opt_serial = false;
  std::string opt_mapping_out, opt_log;
  auto* opt = app.add_subcommand("optimize", "Person-by-person optimization of the sensor mappings");
  opt_model.add(opt);
  opt_priv.add(opt);
  opt->add_option("--seed", opt_seed, "Seed of the initial mapping");
  opt->add_option("--xi", opt_cfg.xi, "Relative-improvement stopping tolerance")->check(CLI::NonNegativeNumber);
  opt->add_option("--max-iters", opt_cfg.max_iters, "Iteration limit")->check(CLI::PositiveNumber);
  opt->add_flag("--serial", opt_serial, "Use the serial coefficient kernel");
  opt->add_option("--out-mapping", opt_mapping_out, "Write the optimized mapping to this file");
  opt->add_option("--log", opt_log, "Per-iteration log (JSON lines)");
  opt->callback([&] {
    if (!opt_priv.given()) throw CLI::ValidationError("optimize", "one of --r or --epsilon is required");
    action = [&] {
      const JointModel m = opt_model.load();
      PbpoConfig cfg = opt_cfg;
      opt_priv.apply(cfg);
      cfg.seed = opt_seed;
      cfg.exec = opt_serial ? Exec::kSerial : Exec::kParallel;
      std::ofstream log;
      if (!opt_log.empty()) {
        log.open(opt_log);
        if (!log) throw Error("cannot write " + opt_log);
        cfg.log = &log;
      }
      const PbpoResult res = pbpo_optimize(m, cfg);
      const FusionLaw law = push_forward(m, res.mapping);
      const FusionErrors errs = evaluate_errors(law, cfg.delta, cfg.seed);
      const PrivacyReport rep = validate_privacy(m, res.mapping, privacy_spec(m, cfg), cfg.seed);
      json support = json::array();
      for (const SensorDesign& d : res.designs) {
        json s = json::array();
        for (const auto& [idx, w] : d.support) {
          s.push_back({{"phi", phi_string(phi_from_index(idx, m.obs_alphabet(), m.quant_alphabet()))},
                       {"weight", w}});
        }
        support.push_back({{"rules", s}, {"uniform_weight", d.uniform_weight}});
      }
      emit(out, {{"error_h", res.error},
                 {"error_nominal", errs.nominal},
                 {"error_mf", errs.mf},
                 {"theta", res.trace.theta},
                 {"theta_eff", res.trace.theta_eff},
                 {"privacy_slack", rep.slack},
                 {"constraint_met", rep.constraint_met},
                 {"epsilon_achieved", rep.epsilon_achieved},
                 {"epsilon_implied", rep.epsilon_implied},
                 {"iterations", res.trace.iterations.size()},
                 {"converged", res.trace.converged},
                 {"designs", support},
                 {"wall_seconds", res.trace.iterations.back().wall_seconds}});
      if (!opt_mapping_out.empty()) write_mapping(opt_mapping_out, res.mapping);
      return kExitOk;
    };
  });

  // mfd
  std::string mfd_model, mfd_mapping;
  double mfd_delta = 0.0;
  std::uint64_t mfd_tie = 0;
  auto* mfd = app.add_subcommand("mfd", "Most-favorable distribution of a model and mapping");
  mfd->add_option("--model", mfd_model, "Model JSON file")->required()->check(CLI::ExistingFile);
  mfd->add_option("--mapping", mfd_mapping, "Mapping JSON file")->required()->check(CLI::ExistingFile);
  mfd->add_option("--delta", mfd_delta, "Contamination level")->required()->check(CLI::Range(0.0, 0.999999));
  mfd->add_option("--tie-seed", mfd_tie, "Seed for breaking likelihood-ratio ties");
  mfd->callback([&] {
    action = [&] {
      const JointModel m = read_model(mfd_model);
      const StochasticMapping q = read_mapping(mfd_mapping);
      const MfdResult r = build_mfd(push_forward(m, q).z_given_g(), mfd_delta, mfd_tie);
      emit(out, {{"r_nominal", r.r_nominal},
                 {"r_mf", r.r_mf},
                 {"z_under", r.z_under},
                 {"z_over", r.z_over},
                 {"A1", r.A1},
                 {"A2", r.A2}});
      return kExitOk;
    };
  });

  // bounds
  ModelArgs b_model;
  std::vector<double> b_eps;
  BoundOptions b_opts;
  auto* bnd = app.add_subcommand("bounds", "Lower and upper bounds on the optimal Bayes error for H");
  b_model.add(bnd);
  bnd->add_option("--epsilon", b_eps, "Privacy budgets")->required()->check(CLI::NonNegativeNumber);
  bnd->add_option("--delta", b_opts.delta, "Contamination level")->check(CLI::Range(0.0, 0.999999));
  bnd->add_option("--samples", b_opts.n_samples, "Sampled contaminated hypotheses");
  bnd->add_option("--seed", b_opts.seed, "Sampling seed");
  bnd->callback([&] {
    action = [&] {
      const JointModel m = b_model.load();
      out << "epsilon,lower,upper,upper_constructive,i_xh_given_g\n";
      for (double e : b_eps) {
        const BoundReport r = compute_bounds(m, e, b_opts);
        out << csv_line({num(e), num(r.lower), num(r.upper), num(r.upper_constructive), num(r.i_xh_given_g)});
      }
      return kExitOk;
    };
  });

  // exponents
  ModelArgs e_model;
  std::vector<double> e_beta;
  bool e_full = false;
  auto* exps = app.add_subcommand("exponents", "Asymptotic error exponents under a privacy rate constraint");
  e_model.add(exps);
  exps->add_option("--beta", e_beta, "Privacy rate constraints")->required()->check(CLI::NonNegativeNumber);
  exps->add_flag("--full-alphabet", e_full, "Do not reduce |Z| to |X|+1");
  exps->callback([&] {
    action = [&] {
      const JointModel m = e_model.load();
      AsymptoticOptions ao;
      ao.reduce_alphabet = !e_full;
      const ConditionalTable xh = single_sensor_conditional(m, Hypothesis::kH);
      const ConditionalTable xg = single_sensor_conditional(m, Hypothesis::kG);
      out << "beta,c_h,c_g,lambda_h,lambda_g,support_size,support,chernoff_h,chernoff_g\n";
      const double ch = chernoff_information(xh.row(0), xh.row(1)).value;
      const double cg = chernoff_information(xg.row(0), xg.row(1)).value;
      for (double beta : e_beta) {
        const AsymptoticSolution s = solve_asymptotic(m, beta, ao);
        std::string support;
        for (const auto& [phi, w] : s.weights) {
          if (!support.empty()) support += '|';
          support += phi_string(phi) + "@" + num(w);
        }
        out << csv_line({num(beta), num(s.c_h), num(s.c_g), num(s.lambda_h), num(s.lambda_g),
                         std::to_string(s.support_size()), support, num(ch), num(cg)});
      }
      return kExitOk;
    };
  });

  // compare
  ModelArgs c_model;
  PrivacyArgs c_priv;
  std::uint64_t c_seed = 0;
  std::string c_anchor, c_out;
  CompareOptions c_opts;
  bool c_no_ml = false;
  auto* cmp = app.add_subcommand("compare", "Calibrated comparison against the baseline privacy metrics");
  c_model.add(cmp);
  c_priv.add(cmp);
  cmp->add_option("--seed", c_seed, "Seed of the information-privacy run");
  cmp->add_option("--anchor", c_anchor, "Calibration anchor (default: nominal if delta = 0, else mf)")
      ->check(CLI::IsMember({"nominal", "mf"}));
  cmp->add_option("--tolerance", c_opts.tolerance, "Calibration tolerance")->check(CLI::PositiveNumber);
  cmp->add_flag("--no-maximal-leakage", c_no_ml, "Skip the maximal-leakage row");
  cmp->add_option("-o,--out", c_out, "CSV output file (default: stdout)");
  cmp->callback([&] {
    if (!c_priv.given()) throw CLI::ValidationError("compare", "one of --r or --epsilon is required");
    action = [&] {
      const JointModel m = c_model.load();
      PbpoConfig cfg;
      c_priv.apply(cfg);
      cfg.seed = c_seed;
      CompareOptions co = c_opts;
      co.include_maximal_leakage = !c_no_ml;
      if (!c_anchor.empty()) co.anchor = c_anchor == "mf" ? Anchor::kMostFavorable : Anchor::kNominal;
      const ComparisonTable t = calibrate_and_compare(m, cfg, co);
      std::string csv =
          "metric,parameter,error_h,error_nominal,error_mf,i_xh_given_g,anchor,target,achieved,matched,"
          "monotone,bracket_lo,bracket_hi,evaluations\n";
      for (const CalibratedRow& r : t.rows) {
        csv += csv_line({to_string(r.result.metric), num(r.result.parameter), num(r.result.error_h),
                         num(r.result.error_nominal), num(r.result.error_mf), num(t.i_xh_given_g),
                         to_string(t.anchor), num(t.target), num(r.achieved),
                         r.matched ? "true" : "false", r.monotone ? "true" : "false", num(r.bracket_lo),
                         num(r.bracket_hi), std::to_string(r.evaluations)});
      }
      if (c_out.empty()) {
        out << csv;
      } else {
        write_text_file(c_out, csv);
      }
      return kExitOk;
    };
  });

  // validate
  std::string v_model, v_mapping, v_csv, v_manifest;
  PrivacyArgs v_priv;
  std::size_t v_samples = 200;
  std::uint64_t v_seed = 0;
  auto* val = app.add_subcommand(
      "validate", "Check invariants of a model + mapping pair, or an experiment CSV against its manifest");
  auto* vm = val->add_option("--model", v_model, "Model JSON file")->check(CLI::ExistingFile);
  auto* vq = val->add_option("--mapping", v_mapping, "Mapping JSON file")->check(CLI::ExistingFile);
  auto* vc = val->add_option("--csv", v_csv, "Experiment CSV")->check(CLI::ExistingFile);
  auto* vf = val->add_option("--manifest", v_manifest, "Experiment manifest")->check(CLI::ExistingFile);
  vm->needs(vq);
  vq->needs(vm);
  vc->needs(vf);
  vf->needs(vc);
  vm->excludes(vc);
  v_priv.add(val);
  val->add_option("--samples", v_samples, "Sampled contaminated hypotheses");
  val->add_option("--seed", v_seed, "Sampling and tie-break seed");
  val->callback([&] {
    if (!vm->count() && !vc->count()) {
      throw CLI::ValidationError("validate", "give --model/--mapping or --csv/--manifest");
    }
    action = [&] {
      if (vc->count()) {
        const json manifest = read_json_file(v_manifest);
        if (!manifest.contains("csv")) throw SchemaError("$.csv", "missing required field");
        const CsvSchema schema = schema_from_json(manifest.at("csv"));
        std::ifstream in(v_csv, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        Checks checks(out);
        try {
          check_csv(buf.str(), schema);
          checks.add("csv_schema", true, std::to_string(schema.rows) + " rows");
        } catch (const SchemaError& e) {
          checks.add("csv_schema", false, e.what());
        }
        return checks.failed() ? kExitFailure : kExitOk;
      }
      return validate_pair(read_model(v_model), read_mapping(v_mapping), v_priv, v_samples, v_seed, out);
    };
  });

  // run
  std::string run_config, run_out;
  auto* runc = app.add_subcommand("run", "Run an experiment sweep from a JSON config (or manifest)");
  runc->add_option("config", run_config, "Experiment config or manifest")->required()->check(CLI::ExistingFile);
  runc->add_option("-o,--out", run_out, "Output directory (overrides the config)");
  runc->callback([&] {
    action = [&] {
      ExperimentConfig cfg = parse_experiment(read_json_file(run_config));
      if (!run_out.empty()) cfg.output_dir = run_out;
      const ExperimentOutputs res = run_experiment(cfg);
      emit(out, {{"csv", res.csv.string()},
                 {"manifest", res.manifest.string()},
                 {"rows", res.rows},
                 {"partial", res.partial}});
      if (res.partial) err << "warning: some grid points were skipped or exceeded the size cap\n";
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace privdetect::cli
