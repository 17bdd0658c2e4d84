#include "cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tmle/csv.hpp"
#include "tmle/dataset.hpp"
#include "tmle/errors.hpp"
#include "tmle/estimators.hpp"
#include "tmle/longitudinal.hpp"
#include "tmle/nuisance.hpp"
#include "tmle/serialize.hpp"
#include "tmle/simulation.hpp"

namespace tmle::cli {
namespace {

using nlohmann::json;

struct Options {
  std::string data;
  std::string config;
  std::string design;
  std::string estimators;
  std::string outcome_learner;
  std::string propensity_learner;
  std::string g0_learner, g1_learner, mu_learner, emu_learner;
  std::optional<int> folds;
  std::string truncate;
  std::string y_bounds;
  std::optional<std::uint64_t> seed;
  std::string out;
  // Column roles.
  std::string covariates;
  std::string treatment = "A";
  std::string outcome = "Y";
  std::string baseline, time1;
  std::string treatment0 = "A0", treatment1 = "A1";
  // simulate
  std::optional<long long> n;
  std::optional<int> replications;
  std::optional<unsigned> threads;
  std::string csv_out;
  std::string data_out;
  // truth
  std::string method;
  std::optional<long long> draws;
  std::optional<double> max_se;
};

// An error that has already been classified into an exit code.
struct Failure {
  int code;
  std::string kind;
  std::string message;
  json details;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) throw InputError("empty entry in list '" + s + "'");
    out.push_back(item);
  }
  return out;
}

std::pair<double, double> parse_pair(const std::string& s, const std::string& flag) {
  const auto parts = split_list(s);
  if (parts.size() != 2) throw InputError(flag + " expects lo,hi");
  double v[2];
  for (int i = 0; i < 2; ++i) {
    const auto& p = parts[static_cast<std::size_t>(i)];
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v[i]);
    if (ec != std::errc() || ptr != p.data() + p.size()) throw InputError(flag + ": '" + p + "' is not a number");
  }
  return {v[0], v[1]};
}

std::vector<EstimatorKind> parse_estimators(const std::string& s) {
  if (s.empty() || s == "all") return all_estimators();
  std::vector<EstimatorKind> out;
  for (const auto& name : split_list(s)) out.push_back(parse_estimator(name));
  return out;
}

std::optional<LearnerSpec> learner_flag(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_learner(s);
}

bool is_longitudinal(const std::string& design) {
  if (design.empty() || design == "point") return false;
  if (design == "longitudinal") return true;
  throw InputError("--design must be 'point' or 'longitudinal'");
}

json error_json(const Failure& f) {
  json e{{"kind", f.kind}, {"message", f.message}, {"exit_code", f.code}};
  if (!f.details.is_null()) e["details"] = f.details;
  return json{{"schema_version", kSchemaVersion}, {"error", e}};
}

Failure classify(const Error& e, int code) {
  Failure f{code, e.kind(), e.what(), nullptr};
  if (dynamic_cast<const InputError*>(&e)) f.code = kExitInput;
  if (const auto* est = dynamic_cast<const EstimationError*>(&e)) {
    f.details = json{{"context", est->context()}, {"cause_kind", est->cause_kind()}};
    if (std::string(est->cause_kind()) == "input_error") f.code = kExitInput;
  }
  if (const auto* cfg = dynamic_cast<const ConfigError*>(&e)) f.details = json{{"violations", cfg->violations()}};
  if (const auto* fold = dynamic_cast<const FoldDegeneracyError*>(&e)) f.details = json{{"fold", fold->fold()}};
  return f;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f) throw InputError("failed writing '" + path + "'");
}

void emit(const Options& opt, std::ostream& out, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  if (opt.out.empty())
    out << text;
  else
    write_text(opt.out, text);
}

json error_entry(const std::string& estimator, const Error& e) {
  json j{{"estimator", estimator}, {"kind", e.kind()}, {"message", e.what()}};
  if (const auto* est = dynamic_cast<const EstimationError*>(&e)) {
    j["context"] = est->context();
    j["cause_kind"] = est->cause_kind();
  }
  return j;
}

int cmd_estimate(const Options& opt, std::ostream& out, std::ostream& err) {
  if (opt.data.empty()) throw InputError("estimate requires --data");
  if (!opt.config.empty()) throw InputError("estimate takes --data, not --config");
  const bool longi = is_longitudinal(opt.design);
  const auto kinds = parse_estimators(opt.estimators);
  std::optional<OutcomeBounds> bounds;
  if (!opt.y_bounds.empty()) {
    const auto [lo, hi] = parse_pair(opt.y_bounds, "--y-bounds");
    if (!(lo <= hi)) throw InputError("--y-bounds needs lo <= hi");
    bounds = OutcomeBounds{lo, hi};
  }
  Truncation trunc;
  if (!opt.truncate.empty()) {
    const auto [lo, hi] = parse_pair(opt.truncate, "--truncate");
    trunc = {lo, hi};
  }
  trunc.validate();
  if (opt.folds && *opt.folds < 1) throw InputError("--folds must be >= 1");
  const auto table = csv::read_file(opt.data);
  const std::uint64_t seed = opt.seed.value_or(0);

  json doc{{"schema_version", kSchemaVersion}, {"command", "estimate"}, {"design", longi ? "longitudinal" : "point"}};
  json results = json::array();
  json errors = json::array();

  if (!longi) {
    PointColumns cols;
    cols.covariates = split_list(opt.covariates);
    cols.treatment = opt.treatment;
    cols.outcome = opt.outcome;
    const Dataset data = dataset_from_table(table, cols, bounds);
    NuisanceConfig nc;
    if (auto l = learner_flag(opt.outcome_learner)) nc.outcome = *l;
    if (auto l = learner_flag(opt.propensity_learner)) nc.propensity = *l;
    nc.truncation = trunc;
    nc.folds = opt.folds;
    nc.seed = seed;
    doc["n"] = data.size();
    doc["covariates"] = data.covariate_names;
    doc["learners"] = json{{"outcome", to_json(nc.outcome)}, {"propensity", to_json(nc.propensity)}};
    doc["folds"] = resolved_folds(nc);
    doc["truncation"] = json::array({trunc.lo, trunc.hi});
    doc["seed"] = seed;
    const NuisanceEstimates nuisance = estimate_nuisances(data, nc);
    for (auto kind : kinds) {
      try {
        results.push_back(to_json(estimate(data, nuisance, kind, TmleOptions{bounds})));
      } catch (const Error& e) {
        errors.push_back(error_entry(to_string(kind), e));
      }
    }
  } else {
    LongColumns cols;
    cols.baseline = split_list(opt.baseline);
    cols.time1 = split_list(opt.time1);
    cols.treatment0 = opt.treatment0;
    cols.treatment1 = opt.treatment1;
    cols.outcome = opt.outcome;
    const LongDataset data = long_dataset_from_table(table, cols, bounds);
    LongLearners learners;
    if (auto l = learner_flag(opt.propensity_learner)) learners.g0 = learners.g1 = *l;
    if (auto l = learner_flag(opt.outcome_learner)) learners.mu = learners.emu = *l;
    if (auto l = learner_flag(opt.g0_learner)) learners.g0 = *l;
    if (auto l = learner_flag(opt.g1_learner)) learners.g1 = *l;
    if (auto l = learner_flag(opt.mu_learner)) learners.mu = *l;
    if (auto l = learner_flag(opt.emu_learner)) learners.emu = *l;
    LongOptions options;
    options.truncation = trunc;
    options.bounds = bounds;
    options.folds = opt.folds;
    options.seed = seed;
    doc["n"] = data.outcome.size();
    doc["baseline"] = data.baseline_names;
    doc["time1"] = data.time1_names;
    doc["learners"] = json{{"g0", to_json(learners.g0)},
                           {"g1", to_json(learners.g1)},
                           {"mu", to_json(learners.mu)},
                           {"emu", to_json(learners.emu)}};
    doc["folds"] = opt.folds.value_or(1);
    doc["truncation"] = json::array({trunc.lo, trunc.hi});
    doc["seed"] = seed;
    const InitialLongFits initial = fit_initial_long(data, learners, options);
    for (auto kind : kinds) {
      try {
        results.push_back(to_json(estimate_long(data, initial, learners, options, kind)));
      } catch (const Error& e) {
        errors.push_back(error_entry(to_string(kind), e));
      }
    }
  }

  doc["results"] = results;
  if (errors.empty()) {
    emit(opt, out, doc);
    return kExitOk;
  }
  doc["errors"] = errors;
  if (!opt.out.empty()) write_text(opt.out, doc.dump(2) + "\n");
  int code = kExitEstimation;
  for (const auto& e : errors)
    if (e.value("cause_kind", e["kind"].get<std::string>()) == "input_error" || e["kind"] == "input_error")
      code = kExitInput;
  Failure f{code, "estimation_failure",
            std::to_string(errors.size()) + " of " + std::to_string(kinds.size()) + " estimators failed", errors};
  err << error_json(f).dump(2) << "\n";
  return code;
}

std::string default_csv_path(const std::string& out) {
  const std::string ext = ".json";
  if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0)
    return out.substr(0, out.size() - ext.size()) + ".replicates.csv";
  return out + ".replicates.csv";
}

int cmd_simulate(const Options& opt, std::ostream& out) {
  if (opt.config.empty()) throw InputError("simulate requires --config");
  if (!opt.data.empty()) throw InputError("simulate takes --config, not --data");
  if (!opt.seed) throw InputError("simulate requires --seed");
  auto cfg = experiment_from_json(read_json_file(opt.config));
  const bool longi = cfg.dgp.design == sim::Design::longitudinal;
  if (!opt.design.empty() && is_longitudinal(opt.design) != longi)
    throw InputError("--design does not match the design in '" + opt.config + "'");
  if (!opt.y_bounds.empty()) throw InputError("simulate takes outcome bounds from the DGP; --y-bounds is not allowed");
  cfg.seed = *opt.seed;
  if (opt.n) cfg.n = static_cast<Eigen::Index>(*opt.n);
  if (opt.replications) cfg.replications = *opt.replications;
  if (opt.threads) cfg.threads = *opt.threads;
  if (!opt.estimators.empty()) cfg.estimators = parse_estimators(opt.estimators);
  if (opt.folds) cfg.folds = *opt.folds;
  if (!opt.truncate.empty()) {
    const auto [lo, hi] = parse_pair(opt.truncate, "--truncate");
    cfg.truncation = {lo, hi};
  }
  if (auto l = learner_flag(opt.outcome_learner)) {
    if (longi)
      cfg.mu.learner = cfg.emu.learner = *l;
    else
      cfg.outcome.learner = *l;
  }
  if (auto l = learner_flag(opt.propensity_learner)) {
    if (longi)
      cfg.g0.learner = cfg.g1.learner = *l;
    else
      cfg.propensity.learner = *l;
  }
  if (auto l = learner_flag(opt.g0_learner)) cfg.g0.learner = *l;
  if (auto l = learner_flag(opt.g1_learner)) cfg.g1.learner = *l;
  if (auto l = learner_flag(opt.mu_learner)) cfg.mu.learner = *l;
  if (auto l = learner_flag(opt.emu_learner)) cfg.emu.learner = *l;

  const auto report = sim::run_experiment(cfg);
  json doc = to_json(report);
  doc["command"] = "simulate";
  doc["dgp"] = to_json(cfg.dgp);
  emit(opt, out, doc);

  std::string csv_path = opt.csv_out;
  if (csv_path.empty() && !opt.out.empty()) csv_path = default_csv_path(opt.out);
  if (!csv_path.empty()) write_text(csv_path, replicates_csv(report));

  if (!opt.data_out.empty()) {
    // Replicate 0's dataset, exactly as the experiment drew it.
    const auto data = sim::generate(cfg.dgp, cfg.n, sim::replicate_seed(cfg.seed, 0));
    std::ostringstream text;
    if (const auto* d = std::get_if<Dataset>(&data))
      csv::write(text, to_table(*d, cfg.dgp.treatment.name, cfg.dgp.outcome.name));
    else
      csv::write(text, to_table(std::get<LongDataset>(data)));
    write_text(opt.data_out, text.str());
  }
  return kExitOk;
}

int cmd_truth(const Options& opt, std::ostream& out) {
  if (opt.config.empty()) throw InputError("truth requires --config");
  const auto dgp = experiment_from_json(read_json_file(opt.config)).dgp;
  if (!opt.design.empty() && is_longitudinal(opt.design) != (dgp.design == sim::Design::longitudinal))
    throw InputError("--design does not match the design in '" + opt.config + "'");
  sim::TruthSpec spec;
  if (opt.method == "analytic")
    spec.method = sim::TruthMethod::analytic;
  else if (opt.method == "monte_carlo")
    spec.method = sim::TruthMethod::monte_carlo;
  else if (!opt.method.empty())
    throw InputError("--method must be 'analytic' or 'monte_carlo'");
  if (opt.draws) spec.draws = *opt.draws;
  spec.max_se = opt.max_se;
  const bool mc = spec.method == sim::TruthMethod::monte_carlo || (!spec.method && !dgp.discrete());
  if (mc && !opt.seed) throw InputError("monte_carlo truth requires --seed");
  const auto truth = sim::true_value(dgp, spec, opt.seed.value_or(0));
  json doc{{"schema_version", kSchemaVersion},
           {"command", "truth"},
           {"design", dgp.design == sim::Design::point ? "point" : "longitudinal"},
           {"truth", to_json(truth)}};
  if (mc) doc["seed"] = *opt.seed;
  emit(opt, out, doc);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Targeted and doubly robust estimation of E(Y^0) and E(Y^{0,0})", "tmle"};
  app.require_subcommand(1);
  auto* est = app.add_subcommand("estimate", "Estimate on a CSV dataset");
  auto* simc = app.add_subcommand("simulate", "Run a simulation experiment from a DGP config");
  auto* truth = app.add_subcommand("truth", "Compute the true parameter of a DGP config");

  for (auto* sub : {est, simc, truth}) {
    sub->add_option("--out", opt.out, "Output path (default: stdout)");
    sub->add_option("--seed", opt.seed, "Seed for every random draw");
    sub->add_option("--design", opt.design, "point | longitudinal");
  }
  for (auto* sub : {simc, truth}) sub->add_option("--config", opt.config, "DGP / experiment JSON")->required();
  for (auto* sub : {est, simc}) {
    sub->add_option("--estimators", opt.estimators, "Comma list: gcomp,one_step,tmle_covariate_linear,...");
    sub->add_option("--outcome-learner", opt.outcome_learner, "glm[:LINK] | basis:D[:O[:LINK]] | knn:K");
    sub->add_option("--propensity-learner", opt.propensity_learner, "Same forms as --outcome-learner");
    sub->add_option("--g0-learner", opt.g0_learner, "Longitudinal: Pr(A0=0 | W0)");
    sub->add_option("--g1-learner", opt.g1_learner, "Longitudinal: Pr(A1=0 | A0=0, W0, W1)");
    sub->add_option("--mu-learner", opt.mu_learner, "Longitudinal: E(Y | A0=A1=0, W0, W1)");
    sub->add_option("--emu-learner", opt.emu_learner, "Longitudinal: regression of mu on W0");
    sub->add_option("--folds", opt.folds, "Cross-fitting folds (1 = none)");
    sub->add_option("--truncate", opt.truncate, "Propensity truncation lo,hi");
  }
  est->add_option("--data", opt.data, "Input CSV")->required();
  est->add_option("--y-bounds", opt.y_bounds, "Outcome bounds lo,hi (default: observed range)");
  est->add_option("--covariates", opt.covariates, "Point: comma list of W columns (default: all others)");
  est->add_option("--treatment", opt.treatment, "Point: treatment column");
  est->add_option("--outcome", opt.outcome, "Outcome column");
  est->add_option("--baseline", opt.baseline, "Longitudinal: W0 columns (default: prefix W0)");
  est->add_option("--time1", opt.time1, "Longitudinal: W1 columns (default: prefix W1)");
  est->add_option("--treatment0", opt.treatment0, "Longitudinal: first treatment column");
  est->add_option("--treatment1", opt.treatment1, "Longitudinal: second treatment column");
  simc->add_option("--n", opt.n, "Sample size per replicate");
  simc->add_option("--replications", opt.replications, "Number of replicates");
  simc->add_option("--threads", opt.threads, "Worker threads (0 = hardware)");
  simc->add_option("--csv-out", opt.csv_out, "Per-replicate CSV (default: next to --out)");
  simc->add_option("--data-out", opt.data_out, "Write replicate 0's dataset as CSV");
  truth->add_option("--method", opt.method, "analytic | monte_carlo");
  truth->add_option("--draws", opt.draws, "Monte Carlo draws");
  truth->add_option("--max-se", opt.max_se, "Fail when the Monte Carlo SE exceeds this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << error_json(Failure{kExitInput, "usage_error", e.what(), nullptr}).dump(2) << "\n";
    return kExitInput;
  }

  try {
    if (est->parsed()) return cmd_estimate(opt, out, err);
    if (simc->parsed()) return cmd_simulate(opt, out);
    return cmd_truth(opt, out);
  } catch (const Error& e) {
    const Failure f = classify(e, kExitEstimation);
    const auto doc = error_json(f);
    err << doc.dump(2) << "\n";
    if (!opt.out.empty()) {
      try {
        write_text(opt.out, doc.dump(2) + "\n");
      } catch (const Error&) {
      }
    }
    return f.code;
  } catch (const std::exception& e) {
    err << error_json(Failure{kExitEstimation, "internal_error", e.what(), nullptr}).dump(2) << "\n";
    return kExitEstimation;
  }
}

}  // namespace tmle::cli
