#include "tmle/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "tmle/errors.hpp"

namespace tmle {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError({where + " must be a JSON object"});
  std::vector<std::string> bad;
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) bad.push_back(where + ": unknown key '" + key + "'");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError({std::string("key '") + key + "': " + e.what()});
  }
}

Link parse_link(const std::string& s) {
  if (s == "identity") return Link::identity;
  if (s == "logit") return Link::logit;
  throw ConfigError({"unknown link '" + s + "'"});
}

OutcomeBounds parse_bounds(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError({where + " must be a [lo, hi] pair of numbers"});
  return {j[0].get<double>(), j[1].get<double>()};
}

json bounds_json(const OutcomeBounds& b) { return json::array({b.lo, b.hi}); }

sim::LinearPredictor parse_lp(const json& j, const std::string& where, const char* intercept_key = "intercept") {
  sim::LinearPredictor lp;
  lp.intercept = get_or<double>(j, intercept_key, 0.0);
  if (j.contains("coefficients")) {
    const auto& c = j.at("coefficients");
    if (!c.is_object()) throw ConfigError({where + ": coefficients must be an object of name -> number"});
    for (const auto& [name, value] : c.items()) {
      if (!value.is_number()) throw ConfigError({where + ": coefficient '" + name + "' must be a number"});
      lp.coefficients.emplace_back(name, value.get<double>());
    }
  }
  return lp;
}

json lp_json(const sim::LinearPredictor& lp, json out, const char* intercept_key = "intercept") {
  out[intercept_key] = lp.intercept;
  json coefs = json::object();
  for (const auto& [name, c] : lp.coefficients) coefs[name] = c;
  out["coefficients"] = coefs;
  return out;
}

sim::CovariateSpec parse_covariate(const json& j) {
  sim::CovariateSpec c;
  c.name = get_or<std::string>(j, "name", "");
  const std::string where = "covariate '" + c.name + "'";
  const auto dist = get_or<std::string>(j, "dist", "bernoulli");
  if (dist == "bernoulli") {
    check_keys(j, {"name", "dist", "p", "intercept", "coefficients"}, where);
    c.dist = sim::Distribution::bernoulli;
    if (j.contains("p")) c.p = get_or<double>(j, "p", 0.5);
    c.lp = parse_lp(j, where);
  } else if (dist == "uniform") {
    check_keys(j, {"name", "dist", "min", "max"}, where);
    c.dist = sim::Distribution::uniform;
    c.min = get_or<double>(j, "min", 0.0);
    c.max = get_or<double>(j, "max", 1.0);
  } else if (dist == "normal") {
    check_keys(j, {"name", "dist", "mean", "coefficients", "sd", "truncate_sd"}, where);
    c.dist = sim::Distribution::normal;
    c.lp = parse_lp(j, where, "mean");
    c.sd = get_or<double>(j, "sd", 1.0);
    c.truncate_sd = get_or<double>(j, "truncate_sd", 4.0);
  } else {
    throw ConfigError({where + ": unknown distribution '" + dist + "'"});
  }
  return c;
}

json covariate_json(const sim::CovariateSpec& c) {
  json j{{"name", c.name}};
  switch (c.dist) {
    case sim::Distribution::bernoulli:
      j["dist"] = "bernoulli";
      if (c.p) {
        j["p"] = *c.p;
        return j;
      }
      return lp_json(c.lp, j);
    case sim::Distribution::uniform:
      j["dist"] = "uniform";
      j["min"] = c.min;
      j["max"] = c.max;
      return j;
    case sim::Distribution::normal:
      j["dist"] = "normal";
      j["sd"] = c.sd;
      j["truncate_sd"] = c.truncate_sd;
      return lp_json(c.lp, j, "mean");
  }
  return j;
}

sim::TreatmentSpec parse_treatment(const json& j, const std::string& default_name) {
  sim::TreatmentSpec t;
  t.name = get_or<std::string>(j, "name", default_name);
  check_keys(j, {"name", "intercept", "coefficients"}, "treatment '" + t.name + "'");
  t.lp = parse_lp(j, "treatment '" + t.name + "'");
  return t;
}

sim::NuisanceSpec parse_nuisance(const json& learners, const json& misspecify, const char* role,
                                 sim::NuisanceSpec spec) {
  if (learners.contains(role)) spec.learner = learner_from_json(learners.at(role));
  if (misspecify.contains(role)) {
    const auto& m = misspecify.at(role);
    check_keys(m, {"omit", "link"}, std::string("misspecify.") + role);
    spec.omit = get_or<std::vector<std::string>>(m, "omit", {});
    if (m.contains("link")) spec.wrong_link = parse_link(m.at("link").get<std::string>());
  }
  return spec;
}

const char* design_name(sim::Design d) { return d == sim::Design::point ? "point" : "longitudinal"; }

std::string num(double v) { return csv::format_double(v); }

}  // namespace

json to_json(const LearnerSpec& learner) {
  json j;
  switch (learner.kind) {
    case LearnerKind::glm_main_terms: j["kind"] = "glm_main_terms"; break;
    case LearnerKind::glm_with_basis:
      j["kind"] = "glm_with_basis";
      j["degree"] = learner.basis.degree;
      j["interaction_order"] = learner.basis.interaction_order;
      break;
    case LearnerKind::knn:
      j["kind"] = "knn";
      j["k"] = learner.k;
      break;
  }
  if (learner.link) j["link"] = to_string(*learner.link);
  if (learner.covariates) j["covariates"] = *learner.covariates;
  return j;
}

LearnerSpec learner_from_json(const json& j) {
  if (j.is_string()) return parse_learner(j.get<std::string>());
  check_keys(j, {"kind", "degree", "interaction_order", "k", "link", "covariates"}, "learner");
  LearnerSpec spec;
  const auto kind = get_or<std::string>(j, "kind", "glm_main_terms");
  if (kind == "glm_main_terms" || kind == "glm") {
    spec.kind = LearnerKind::glm_main_terms;
  } else if (kind == "glm_with_basis") {
    spec.kind = LearnerKind::glm_with_basis;
    spec.basis.degree = get_or<int>(j, "degree", 1);
    spec.basis.interaction_order = get_or<int>(j, "interaction_order", 1);
  } else if (kind == "knn" || kind == "k_nearest_neighbors") {
    spec.kind = LearnerKind::knn;
    spec.k = get_or<int>(j, "k", 0);
    if (spec.k < 1) throw ConfigError({"knn learner needs k >= 1"});
  } else {
    throw ConfigError({"unknown learner kind '" + kind + "'"});
  }
  if (j.contains("link")) spec.link = parse_link(j.at("link").get<std::string>());
  if (j.contains("covariates")) spec.covariates = get_or<std::vector<std::string>>(j, "covariates", {});
  return spec;
}

LearnerSpec parse_learner(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.empty()) throw InputError("empty learner description");
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError("learner '" + text + "': '" + s + "' is not an integer");
    }
  };
  const auto& head = parts[0];
  if (head == "glm") {
    if (parts.size() > 2) throw InputError("learner '" + text + "': expected glm[:LINK]");
    return LearnerSpec::glm(parts.size() == 2 ? std::optional<Link>(parse_link(parts[1])) : std::nullopt);
  }
  if (head == "basis") {
    if (parts.size() < 2 || parts.size() > 4) throw InputError("learner '" + text + "': expected basis:DEGREE[:ORDER[:LINK]]");
    const int degree = to_int(parts[1]);
    const int order = parts.size() >= 3 ? to_int(parts[2]) : 1;
    return LearnerSpec::with_basis(degree, order,
                                   parts.size() == 4 ? std::optional<Link>(parse_link(parts[3])) : std::nullopt);
  }
  if (head == "knn") {
    if (parts.size() != 2) throw InputError("learner '" + text + "': expected knn:K");
    const int k = to_int(parts[1]);
    if (k < 1) throw InputError("learner '" + text + "': k must be >= 1");
    return LearnerSpec::knn(k);
  }
  throw InputError("unknown learner '" + text + "'");
}

json to_json(const EstimateResult& r) {
  json targeting = json::array();
  for (const auto& t : r.diagnostics.targeting)
    targeting.push_back({{"step", t.name},
                         {"response", t.response},
                         {"coefficient", t.coefficient},
                         {"score_residual", t.score_residual},
                         {"weight_sum", t.weight_sum},
                         {"iterations", t.iterations}});
  json diag{{"mean_eif", r.diagnostics.mean_eif},
            {"score_residuals", targeting},
            {"min_prediction", r.diagnostics.min_prediction},
            {"max_prediction", r.diagnostics.max_prediction},
            {"truncation_hits", r.diagnostics.truncation_hits},
            {"notes", r.diagnostics.notes}};
  if (r.diagnostics.outcome_bounds) diag["outcome_bounds"] = bounds_json(*r.diagnostics.outcome_bounds);
  if (!r.diagnostics.trace.empty()) diag["trace"] = r.diagnostics.trace;
  return json{{"estimator", r.estimator},
              {"psi_hat", r.psi_hat},
              {"se", r.se},
              {"ci95", json::array({r.ci95.lo, r.ci95.hi})},
              {"diagnostics", diag}};
}

json to_json(const sim::TruthValue& t) {
  json j{{"value", t.value}, {"method", t.method == sim::TruthMethod::analytic ? "analytic" : "monte_carlo"}};
  if (t.method == sim::TruthMethod::monte_carlo) {
    j["mc_se"] = t.mc_se;
    j["draws"] = t.draws;
  }
  return j;
}

json to_json(const sim::ExperimentReport& report) {
  json ests = json::array();
  for (const auto& s : report.estimators)
    ests.push_back({{"estimator", s.estimator},
                    {"successes", s.successes},
                    {"failures", s.failures},
                    {"non_convergence", s.non_convergence},
                    {"mean_estimate", s.mean_estimate},
                    {"mean_bias", s.mean_bias},
                    {"empirical_se", s.empirical_se},
                    {"bias_mc_se", s.bias_mc_se},
                    {"mean_estimated_se", s.mean_estimated_se},
                    {"coverage", s.coverage},
                    {"mean_ci_width", s.mean_ci_width},
                    {"prop_out_of_bounds", s.prop_out_of_bounds},
                    {"out_of_bounds", s.out_of_bounds}});
  return json{{"schema_version", kSchemaVersion},
              {"design", design_name(report.design)},
              {"n", report.n},
              {"replications_requested", report.replications_requested},
              {"replicate_rows", report.replicates.size()},
              {"seed", report.seed},
              {"truth", to_json(report.truth)},
              {"outcome_bounds", bounds_json(report.bounds)},
              {"estimators", ests}};
}

sim::DgpConfig dgp_from_json(const json& j) {
  check_keys(j, {"schema_version", "design", "covariates", "treatment", "time1_covariates", "treatment1", "outcome",
                 "positivity_floor", "seed", "description"},
             "dgp");
  sim::DgpConfig d;
  const auto design = get_or<std::string>(j, "design", "point");
  if (design == "point")
    d.design = sim::Design::point;
  else if (design == "longitudinal")
    d.design = sim::Design::longitudinal;
  else
    throw ConfigError({"unknown design '" + design + "'"});
  const bool longi = d.design == sim::Design::longitudinal;
  if (j.contains("covariates"))
    for (const auto& c : j.at("covariates")) d.baseline.push_back(parse_covariate(c));
  if (!j.contains("treatment")) throw ConfigError({"dgp: missing 'treatment'"});
  d.treatment = parse_treatment(j.at("treatment"), longi ? "A0" : "A");
  if (j.contains("time1_covariates"))
    for (const auto& c : j.at("time1_covariates")) d.time1.push_back(parse_covariate(c));
  if (j.contains("treatment1")) d.treatment1 = parse_treatment(j.at("treatment1"), "A1");
  if (!j.contains("outcome")) throw ConfigError({"dgp: missing 'outcome'"});
  const auto& o = j.at("outcome");
  check_keys(o, {"name", "type", "link", "intercept", "coefficients", "noise", "bounds"}, "outcome");
  d.outcome.name = get_or<std::string>(o, "name", "Y");
  const auto type = get_or<std::string>(o, "type", "binary");
  if (type == "binary")
    d.outcome.type = sim::OutcomeType::binary;
  else if (type == "bounded_continuous")
    d.outcome.type = sim::OutcomeType::bounded_continuous;
  else
    throw ConfigError({"outcome: unknown type '" + type + "'"});
  d.outcome.link = parse_link(get_or<std::string>(o, "link", "identity"));
  d.outcome.lp = parse_lp(o, "outcome");
  if (o.contains("bounds")) d.outcome.bounds = parse_bounds(o.at("bounds"), "outcome.bounds");
  if (o.contains("noise")) {
    const auto& n = o.at("noise");
    check_keys(n, {"kind", "half_width", "concentration"}, "outcome.noise");
    const auto kind = get_or<std::string>(n, "kind", "none");
    if (kind == "none")
      d.outcome.noise = sim::NoiseKind::none;
    else if (kind == "uniform")
      d.outcome.noise = sim::NoiseKind::uniform;
    else if (kind == "beta")
      d.outcome.noise = sim::NoiseKind::beta;
    else
      throw ConfigError({"outcome.noise: unknown kind '" + kind + "'"});
    d.outcome.half_width = get_or<double>(n, "half_width", 0.0);
    d.outcome.concentration = get_or<double>(n, "concentration", 10.0);
  }
  d.positivity_floor = get_or<double>(j, "positivity_floor", 0.01);
  if (j.contains("seed")) d.seed = get_or<std::uint64_t>(j, "seed", 0);
  d.validate();
  return d;
}

json to_json(const sim::DgpConfig& d) {
  json j{{"schema_version", kSchemaVersion}, {"design", design_name(d.design)}};
  j["covariates"] = json::array();
  for (const auto& c : d.baseline) j["covariates"].push_back(covariate_json(c));
  j["treatment"] = lp_json(d.treatment.lp, json{{"name", d.treatment.name}});
  if (d.design == sim::Design::longitudinal) {
    j["time1_covariates"] = json::array();
    for (const auto& c : d.time1) j["time1_covariates"].push_back(covariate_json(c));
    if (d.treatment1) j["treatment1"] = lp_json(d.treatment1->lp, json{{"name", d.treatment1->name}});
  }
  json o{{"name", d.outcome.name},
         {"type", d.outcome.type == sim::OutcomeType::binary ? "binary" : "bounded_continuous"},
         {"link", to_string(d.outcome.link)},
         {"bounds", bounds_json(d.outcome.bounds)}};
  if (d.outcome.noise != sim::NoiseKind::none) {
    json n;
    n["kind"] = d.outcome.noise == sim::NoiseKind::uniform ? "uniform" : "beta";
    n["half_width"] = d.outcome.half_width;
    n["concentration"] = d.outcome.concentration;
    o["noise"] = n;
  }
  j["outcome"] = lp_json(d.outcome.lp, o);
  j["positivity_floor"] = d.positivity_floor;
  if (d.seed) j["seed"] = *d.seed;
  return j;
}

sim::ExperimentConfig experiment_from_json(const json& j) {
  sim::ExperimentConfig cfg;
  const bool wrapped = j.is_object() && j.contains("dgp");
  if (wrapped) check_keys(j, {"schema_version", "dgp", "experiment", "description"}, "config");
  cfg.dgp = dgp_from_json(wrapped ? j.at("dgp") : j);
  if (cfg.dgp.seed) cfg.seed = *cfg.dgp.seed;
  if (!wrapped || !j.contains("experiment")) return cfg;
  const auto& e = j.at("experiment");
  check_keys(e, {"n", "replications", "seed", "estimators", "learners", "misspecify", "truncation", "folds", "truth",
                 "threads"},
             "experiment");
  cfg.n = get_or<Eigen::Index>(e, "n", cfg.n);
  cfg.replications = get_or<int>(e, "replications", cfg.replications);
  cfg.seed = get_or<std::uint64_t>(e, "seed", cfg.seed);
  if (e.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& name : e.at("estimators")) cfg.estimators.push_back(parse_estimator(name.get<std::string>()));
  }
  const json learners = e.value("learners", json::object());
  const json misspecify = e.value("misspecify", json::object());
  check_keys(learners, {"outcome", "propensity", "g0", "g1", "mu", "emu"}, "experiment.learners");
  check_keys(misspecify, {"outcome", "propensity", "g0", "g1", "mu", "emu"}, "experiment.misspecify");
  cfg.outcome = parse_nuisance(learners, misspecify, "outcome", cfg.outcome);
  cfg.propensity = parse_nuisance(learners, misspecify, "propensity", cfg.propensity);
  cfg.g0 = parse_nuisance(learners, misspecify, "g0", cfg.g0);
  cfg.g1 = parse_nuisance(learners, misspecify, "g1", cfg.g1);
  cfg.mu = parse_nuisance(learners, misspecify, "mu", cfg.mu);
  cfg.emu = parse_nuisance(learners, misspecify, "emu", cfg.emu);
  if (e.contains("truncation")) {
    const auto b = parse_bounds(e.at("truncation"), "experiment.truncation");
    cfg.truncation = {b.lo, b.hi};
  }
  if (e.contains("folds")) cfg.folds = get_or<int>(e, "folds", 1);
  if (e.contains("truth")) {
    const auto& t = e.at("truth");
    check_keys(t, {"method", "draws", "max_se"}, "experiment.truth");
    if (t.contains("method")) {
      const auto m = t.at("method").get<std::string>();
      if (m == "analytic")
        cfg.truth.method = sim::TruthMethod::analytic;
      else if (m == "monte_carlo")
        cfg.truth.method = sim::TruthMethod::monte_carlo;
      else
        throw ConfigError({"experiment.truth: unknown method '" + m + "'"});
    }
    cfg.truth.draws = get_or<std::int64_t>(t, "draws", cfg.truth.draws);
    if (t.contains("max_se")) cfg.truth.max_se = get_or<double>(t, "max_se", 0.0);
  }
  cfg.threads = get_or<unsigned>(e, "threads", 0u);
  return cfg;
}

std::string replicates_csv(const sim::ExperimentReport& report) {
  std::ostringstream out;
  out << "replicate,seed,estimator,status,psi_hat,se,ci_lo,ci_hi,covered,out_of_bounds,error_kind\n";
  for (const auto& r : report.replicates) {
    out << r.replicate << ',' << r.seed << ',' << r.estimator << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok)
      out << num(r.psi_hat) << ',' << num(r.se) << ',' << num(r.ci95.lo) << ',' << num(r.ci95.hi) << ','
          << (r.covered ? 1 : 0) << ',' << (r.out_of_bounds ? 1 : 0) << ',';
    else
      out << ",,,,,,";
    out << r.error_kind << '\n';
  }
  return out.str();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace tmle
