#include "tmle/simulation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>

#include "tmle/errors.hpp"
#include "tmle/glm.hpp"

namespace tmle::sim {
namespace {

// Structural order: baseline..., A(0), time1..., [A1], Y.
enum class NodeKind { covariate, treatment, outcome };

struct CompiledLp {
  double intercept = 0.0;
  std::vector<std::pair<std::size_t, double>> terms;

  double eval(const std::vector<double>& v) const {
    double s = intercept;
    for (const auto& [slot, c] : terms) s += c * v[slot];
    return s;
  }
};

struct Node {
  NodeKind kind = NodeKind::covariate;
  const CovariateSpec* covariate = nullptr;
  const TreatmentSpec* treatment = nullptr;
  CompiledLp lp;
};

struct Interval1 {
  double lo = 0.0;
  double hi = 0.0;
};

struct Program {
  std::vector<Node> nodes;  // outcome is last
  std::vector<std::string> names;
  std::size_t treatment0 = 0;
  std::optional<std::size_t> treatment1;
};

Program compile(const DgpConfig& dgp, std::vector<std::string>* violations) {
  Program prog;
  std::unordered_map<std::string, std::size_t> slot;
  auto fail = [&](const std::string& msg) {
    if (violations)
      violations->push_back(msg);
    else
      throw ConfigError({msg});
  };
  auto compile_lp = [&](const LinearPredictor& lp, const std::string& owner) {
    CompiledLp out;
    out.intercept = lp.intercept;
    if (!std::isfinite(lp.intercept)) fail(owner + ": intercept must be finite");
    for (const auto& [name, coef] : lp.coefficients) {
      const auto it = slot.find(name);
      if (it == slot.end()) {
        fail(owner + ": references '" + name + "', which is not generated before it");
        continue;
      }
      if (!std::isfinite(coef)) fail(owner + ": coefficient on '" + name + "' must be finite");
      out.terms.emplace_back(it->second, coef);
    }
    return out;
  };
  auto declare = [&](const std::string& name) {
    if (name.empty()) fail("variable with empty name");
    if (!slot.emplace(name, prog.names.size()).second) fail("duplicate variable name '" + name + "'");
    prog.names.push_back(name);
  };
  auto add_covariates = [&](const std::vector<CovariateSpec>& covs) {
    for (const auto& c : covs) {
      Node node;
      node.kind = NodeKind::covariate;
      node.covariate = &c;
      node.lp = compile_lp(c.lp, "covariate '" + c.name + "'");
      prog.nodes.push_back(node);
      declare(c.name);
    }
  };
  auto add_treatment = [&](const TreatmentSpec& t) {
    Node node;
    node.kind = NodeKind::treatment;
    node.treatment = &t;
    node.lp = compile_lp(t.lp, "treatment '" + t.name + "'");
    prog.nodes.push_back(node);
    declare(t.name);
    return prog.nodes.size() - 1;
  };

  add_covariates(dgp.baseline);
  prog.treatment0 = add_treatment(dgp.treatment);
  if (dgp.design == Design::longitudinal) {
    add_covariates(dgp.time1);
    if (dgp.treatment1) prog.treatment1 = add_treatment(*dgp.treatment1);
  }
  Node out;
  out.kind = NodeKind::outcome;
  out.lp = compile_lp(dgp.outcome.lp, "outcome '" + dgp.outcome.name + "'");
  prog.nodes.push_back(out);
  declare(dgp.outcome.name);
  return prog;
}

double outcome_mean(const OutcomeSpec& o, double lp) {
  if (o.type == OutcomeType::binary) return o.link == Link::identity ? lp : expit(lp);
  return o.link == Link::identity ? lp : o.bounds.lo + (o.bounds.hi - o.bounds.lo) * expit(lp);
}

double bernoulli_p(const CovariateSpec& c, const CompiledLp& lp, const std::vector<double>& v) {
  return c.p ? *c.p : expit(lp.eval(v));
}

Interval1 lp_range(const CompiledLp& lp, const std::vector<Interval1>& ranges) {
  Interval1 r{lp.intercept, lp.intercept};
  for (const auto& [s, c] : lp.terms) {
    const double a = c * ranges[s].lo;
    const double b = c * ranges[s].hi;
    r.lo += std::min(a, b);
    r.hi += std::max(a, b);
  }
  return r;
}

std::mt19937_64 make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

struct Sampler {
  const DgpConfig& dgp;
  const Program& prog;
  std::mt19937_64 rng;
  std::uniform_real_distribution<double> unif{0.0, 1.0};
  std::normal_distribution<double> normal{0.0, 1.0};

  double draw_covariate(const Node& node, const std::vector<double>& v) {
    const auto& c = *node.covariate;
    switch (c.dist) {
      case Distribution::bernoulli: return unif(rng) < bernoulli_p(c, node.lp, v) ? 1.0 : 0.0;
      case Distribution::uniform: return c.min + (c.max - c.min) * unif(rng);
      case Distribution::normal: {
        double z;
        do z = normal(rng);
        while (std::abs(z) > c.truncate_sd);
        return node.lp.eval(v) + c.sd * z;
      }
    }
    return 0.0;
  }

  double draw_outcome(double mean) {
    const auto& o = dgp.outcome;
    if (o.type == OutcomeType::binary) return unif(rng) < mean ? 1.0 : 0.0;
    switch (o.noise) {
      case NoiseKind::none: return mean;
      case NoiseKind::uniform: return mean + o.half_width * (2.0 * unif(rng) - 1.0);
      case NoiseKind::beta: {
        const double range = o.bounds.hi - o.bounds.lo;
        const double m = (mean - o.bounds.lo) / range;
        std::gamma_distribution<double> ga(o.concentration * m, 1.0);
        std::gamma_distribution<double> gb(o.concentration * (1.0 - m), 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        return o.bounds.lo + range * (x / (x + y));
      }
    }
    return mean;
  }

  // One row; `force_untreated` sets every treatment to 0.
  std::vector<double> row(bool force_untreated) {
    std::vector<double> v(prog.nodes.size(), 0.0);
    for (std::size_t k = 0; k < prog.nodes.size(); ++k) {
      const auto& node = prog.nodes[k];
      switch (node.kind) {
        case NodeKind::covariate: v[k] = draw_covariate(node, v); break;
        case NodeKind::treatment:
          v[k] = force_untreated ? 0.0 : (unif(rng) < expit(node.lp.eval(v)) ? 1.0 : 0.0);
          break;
        case NodeKind::outcome: v[k] = draw_outcome(outcome_mean(dgp.outcome, node.lp.eval(v))); break;
      }
    }
    return v;
  }
};

std::vector<std::vector<double>> draw_rows(const DgpConfig& dgp, Eigen::Index n, std::uint64_t seed) {
  if (n < 2) throw InputError("generate: n must be >= 2");
  dgp.validate();
  const auto prog = compile(dgp, nullptr);
  Sampler s{dgp, prog, make_rng(seed)};
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows.push_back(s.row(false));
  return rows;
}

Eigen::MatrixXd gather(const std::vector<std::vector<double>>& rows, std::size_t first, std::size_t count) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < count; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][first + j];
  return m;
}

std::vector<std::string> names_of(const std::vector<CovariateSpec>& covs) {
  std::vector<std::string> out;
  for (const auto& c : covs) out.push_back(c.name);
  return out;
}

// Analytic truth: exact summation over the Bernoulli support with treatments
// forced to 0.
double enumerate(const DgpConfig& dgp, const Program& prog, std::vector<double>& v, std::size_t k) {
  if (k + 1 == prog.nodes.size()) return outcome_mean(dgp.outcome, prog.nodes[k].lp.eval(v));
  const auto& node = prog.nodes[k];
  if (node.kind == NodeKind::treatment) {
    v[k] = 0.0;
    return enumerate(dgp, prog, v, k + 1);
  }
  const double p = bernoulli_p(*node.covariate, node.lp, v);
  double total = 0.0;
  if (p > 0.0) {
    v[k] = 1.0;
    total += p * enumerate(dgp, prog, v, k + 1);
  }
  if (p < 1.0) {
    v[k] = 0.0;
    total += (1.0 - p) * enumerate(dgp, prog, v, k + 1);
  }
  return total;
}

bool is_glm_failure(const std::string& kind) {
  return kind == "non_convergence" || kind == "separation" || kind == "singular_design";
}

}  // namespace

void DgpConfig::validate() const {
  std::vector<std::string> v;
  if (!(positivity_floor > 0.0 && positivity_floor < 0.5)) v.push_back("positivity_floor must lie in (0, 0.5)");
  if (design == Design::point && (!time1.empty() || treatment1))
    v.push_back("point design cannot declare time-1 covariates or a second treatment");
  if (design == Design::longitudinal && !treatment1) v.push_back("longitudinal design needs treatment1");
  const auto prog = compile(*this, &v);

  std::vector<Interval1> ranges(prog.nodes.size());
  for (std::size_t k = 0; k < prog.nodes.size(); ++k) {
    const auto& node = prog.nodes[k];
    if (node.kind == NodeKind::covariate) {
      const auto& c = *node.covariate;
      switch (c.dist) {
        case Distribution::bernoulli:
          if (c.p && !(*c.p >= 0.0 && *c.p <= 1.0)) v.push_back("covariate '" + c.name + "': p must lie in [0, 1]");
          if (c.p && !c.lp.coefficients.empty())
            v.push_back("covariate '" + c.name + "': give either p or a linear predictor, not both");
          ranges[k] = {0.0, 1.0};
          break;
        case Distribution::uniform:
          if (!(c.min < c.max)) v.push_back("covariate '" + c.name + "': uniform needs min < max");
          if (!c.lp.coefficients.empty()) v.push_back("covariate '" + c.name + "': uniform takes no coefficients");
          ranges[k] = {c.min, c.max};
          break;
        case Distribution::normal: {
          if (!(c.sd > 0.0)) v.push_back("covariate '" + c.name + "': normal needs sd > 0");
          if (!(c.truncate_sd > 0.0)) v.push_back("covariate '" + c.name + "': truncate_sd must be > 0");
          const auto m = lp_range(node.lp, ranges);
          ranges[k] = {m.lo - c.truncate_sd * c.sd, m.hi + c.truncate_sd * c.sd};
          break;
        }
      }
    } else if (node.kind == NodeKind::treatment) {
      const auto r = lp_range(node.lp, ranges);
      const double plo = expit(r.lo);
      const double phi = expit(r.hi);
      if (plo < positivity_floor || phi > 1.0 - positivity_floor)
        v.push_back("treatment '" + node.treatment->name + "': propensity range [" + std::to_string(plo) + ", " +
                    std::to_string(phi) + "] violates positivity floor " + std::to_string(positivity_floor));
      ranges[k] = {0.0, 1.0};
    } else {
      const auto& o = outcome;
      const auto r = lp_range(node.lp, ranges);
      if (o.type == OutcomeType::binary) {
        if (o.bounds.lo != 0.0 || o.bounds.hi != 1.0) v.push_back("binary outcome must have bounds [0, 1]");
        if (o.link == Link::identity && (r.lo < 0.0 || r.hi > 1.0))
          v.push_back("binary outcome: identity-link probability range [" + std::to_string(r.lo) + ", " +
                      std::to_string(r.hi) + "] leaves [0, 1]");
        if (o.noise != NoiseKind::none) v.push_back("binary outcome takes no noise");
      } else {
        if (!(o.bounds.lo < o.bounds.hi)) v.push_back("bounded outcome needs lo < hi");
        const double mlo = outcome_mean(o, r.lo);
        const double mhi = outcome_mean(o, r.hi);
        const double hw = o.noise == NoiseKind::uniform ? o.half_width : 0.0;
        if (o.noise == NoiseKind::uniform && !(o.half_width >= 0.0)) v.push_back("uniform noise needs half_width >= 0");
        if (o.noise == NoiseKind::beta) {
          if (!(o.concentration > 0.0)) v.push_back("beta noise needs concentration > 0");
          if (mlo <= o.bounds.lo || mhi >= o.bounds.hi)
            v.push_back("beta noise needs the structural mean strictly inside the bounds");
        }
        if (mlo - hw < o.bounds.lo || mhi + hw > o.bounds.hi)
          v.push_back("outcome range [" + std::to_string(mlo - hw) + ", " + std::to_string(mhi + hw) +
                      "] leaves the declared bounds");
      }
    }
  }
  if (!v.empty()) throw ConfigError(std::move(v));
}

bool DgpConfig::discrete() const {
  auto all_bernoulli = [](const std::vector<CovariateSpec>& covs) {
    return std::all_of(covs.begin(), covs.end(), [](const auto& c) { return c.dist == Distribution::bernoulli; });
  };
  return all_bernoulli(baseline) && (design == Design::point || all_bernoulli(time1));
}

Dataset generate_point(const DgpConfig& dgp, Eigen::Index n, std::uint64_t seed) {
  if (dgp.design != Design::point) throw InputError("generate_point: DGP is longitudinal");
  const auto rows = draw_rows(dgp, n, seed);
  const std::size_t p = dgp.baseline.size();
  Dataset d;
  d.covariates = gather(rows, 0, p);
  d.covariate_names = names_of(dgp.baseline);
  d.treatment.resize(n);
  d.outcome.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.treatment(i) = static_cast<int>(rows[static_cast<std::size_t>(i)][p]);
    d.outcome(i) = rows[static_cast<std::size_t>(i)][p + 1];
  }
  d.bounds = dgp.outcome.bounds;
  return d;
}

LongDataset generate_long(const DgpConfig& dgp, Eigen::Index n, std::uint64_t seed) {
  if (dgp.design != Design::longitudinal) throw InputError("generate_long: DGP is point-treatment");
  const auto rows = draw_rows(dgp, n, seed);
  const std::size_t p0 = dgp.baseline.size();
  const std::size_t p1 = dgp.time1.size();
  LongDataset d;
  d.baseline = gather(rows, 0, p0);
  d.baseline_names = names_of(dgp.baseline);
  d.time1 = gather(rows, p0 + 1, p1);
  d.time1_names = names_of(dgp.time1);
  d.treatment0.resize(n);
  d.treatment1.resize(n);
  d.outcome.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.treatment0(i) = static_cast<int>(r[p0]);
    d.treatment1(i) = static_cast<int>(r[p0 + 1 + p1]);
    d.outcome(i) = r[p0 + p1 + 2];
  }
  d.bounds = dgp.outcome.bounds;
  return d;
}

GeneratedData generate(const DgpConfig& dgp, Eigen::Index n, std::uint64_t seed) {
  if (dgp.design == Design::point) return generate_point(dgp, n, seed);
  return generate_long(dgp, n, seed);
}

double structural_mean(const DgpConfig& dgp, const std::map<std::string, double>& values) {
  const auto prog = compile(dgp, nullptr);
  std::vector<double> v(prog.nodes.size(), 0.0);
  for (std::size_t k = 0; k + 1 < prog.nodes.size(); ++k) {
    const auto it = values.find(prog.names[k]);
    if (it == values.end()) throw InputError("structural_mean: missing value for '" + prog.names[k] + "'");
    v[k] = it->second;
  }
  return outcome_mean(dgp.outcome, prog.nodes.back().lp.eval(v));
}

TruthValue true_value_analytic(const DgpConfig& dgp) {
  dgp.validate();
  if (!dgp.discrete()) throw UnsupportedError("analytic truth requires every covariate to be Bernoulli");
  const auto prog = compile(dgp, nullptr);
  std::vector<double> v(prog.nodes.size(), 0.0);
  return {enumerate(dgp, prog, v, 0), TruthMethod::analytic, 0.0, 0};
}

TruthValue true_value_monte_carlo(const DgpConfig& dgp, std::int64_t draws, std::uint64_t seed,
                                  std::optional<double> max_se) {
  if (draws < 2) throw InputError("monte_carlo truth needs at least 2 draws");
  dgp.validate();
  const auto prog = compile(dgp, nullptr);
  Sampler s{dgp, prog, make_rng(seed)};
  // Welford accumulation of counterfactual outcomes.
  double mean = 0.0, m2 = 0.0;
  for (std::int64_t i = 0; i < draws; ++i) {
    const double y = s.row(true).back();
    const double delta = y - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (y - mean);
  }
  const double se = std::sqrt(m2 / static_cast<double>(draws - 1) / static_cast<double>(draws));
  if (max_se && se > *max_se)
    throw InputError("monte_carlo truth: standard error " + std::to_string(se) + " exceeds threshold " +
                     std::to_string(*max_se) + "; increase the number of draws");
  return {mean, TruthMethod::monte_carlo, se, draws};
}

TruthValue true_value(const DgpConfig& dgp, const TruthSpec& spec, std::uint64_t seed) {
  const auto method = spec.method.value_or(dgp.discrete() ? TruthMethod::analytic : TruthMethod::monte_carlo);
  if (method == TruthMethod::analytic) return true_value_analytic(dgp);
  return true_value_monte_carlo(dgp, spec.draws, seed, spec.max_se);
}

LearnerSpec NuisanceSpec::resolve(const std::vector<std::string>& covariate_names) const {
  LearnerSpec out = learner;
  if (!omit.empty()) {
    const auto& base = learner.covariates ? *learner.covariates : covariate_names;
    out.covariates.emplace();
    for (const auto& c : base)
      if (std::find(omit.begin(), omit.end(), c) == omit.end()) out.covariates->push_back(c);
  }
  if (wrong_link) out.link = wrong_link;
  return out;
}

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

const EstimatorSummary& ExperimentReport::summary(const std::string& estimator) const {
  for (const auto& s : estimators)
    if (s.estimator == estimator) return s;
  throw InputError("report has no estimator '" + estimator + "'");
}

std::vector<ReplicateEstimate> run_replicate(const ExperimentConfig& config, int replicate, double truth) {
  const std::uint64_t seed = replicate_seed(config.seed, static_cast<std::uint64_t>(replicate));
  const auto& bounds = config.dgp.outcome.bounds;
  std::vector<ReplicateEstimate> out;
  for (auto kind : config.estimators) {
    ReplicateEstimate e;
    e.replicate = replicate;
    e.seed = seed;
    e.estimator = to_string(kind);
    out.push_back(e);
  }
  auto record = [&](std::size_t k, const EstimateResult& r) {
    auto& e = out[k];
    e.ok = true;
    e.psi_hat = r.psi_hat;
    e.se = r.se;
    e.ci95 = r.ci95;
    e.covered = r.ci95.lo <= truth && truth <= r.ci95.hi;
    e.out_of_bounds = r.psi_hat < bounds.lo || r.psi_hat > bounds.hi;
  };
  auto fail_one = [&](std::size_t k, const Error& err) {
    out[k].ok = false;
    out[k].error_kind = err.kind();
    if (const auto* est = dynamic_cast<const EstimationError*>(&err)) out[k].error_kind = est->cause_kind();
    out[k].error = err.what();
  };
  auto fail_all = [&](const Error& err) {
    for (std::size_t k = 0; k < out.size(); ++k) fail_one(k, err);
  };

  try {
    if (config.dgp.design == Design::point) {
      const Dataset data = generate_point(config.dgp, config.n, seed);
      NuisanceConfig nc;
      nc.outcome = config.outcome.resolve(data.covariate_names);
      nc.propensity = config.propensity.resolve(data.covariate_names);
      nc.truncation = config.truncation;
      nc.folds = config.folds;
      nc.seed = seed;
      NuisanceEstimates nuisance;
      try {
        nuisance = estimate_nuisances(data, nc);
      } catch (const Error& err) {
        fail_all(err);
        return out;
      }
      for (std::size_t k = 0; k < out.size(); ++k) {
        try {
          record(k, estimate(data, nuisance, config.estimators[k], TmleOptions{bounds}));
        } catch (const Error& err) {
          fail_one(k, err);
        }
      }
    } else {
      const LongDataset data = generate_long(config.dgp, config.n, seed);
      LongLearners learners;
      learners.g0 = config.g0.resolve(data.baseline_names);
      learners.g1 = config.g1.resolve(data.history_names());
      learners.mu = config.mu.resolve(data.history_names());
      learners.emu = config.emu.resolve(data.baseline_names);
      LongOptions options;
      options.truncation = config.truncation;
      options.bounds = bounds;
      options.folds = config.folds;
      options.seed = seed;
      InitialLongFits initial;
      try {
        initial = fit_initial_long(data, learners, options);
      } catch (const Error& err) {
        fail_all(err);
        return out;
      }
      for (std::size_t k = 0; k < out.size(); ++k) {
        try {
          record(k, estimate_long(data, initial, learners, options, config.estimators[k]));
        } catch (const Error& err) {
          fail_one(k, err);
        }
      }
    }
  } catch (const Error& err) {
    fail_all(err);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.replications < 2) throw InputError("run_experiment needs at least 2 replications");
  if (config.n < 2) throw InputError("run_experiment needs n >= 2");
  if (config.estimators.empty()) throw InputError("run_experiment needs at least one estimator");
  config.dgp.validate();
  config.truncation.validate();
  {
    std::set<std::string> known;
    for (const auto& c : config.dgp.baseline) known.insert(c.name);
    for (const auto& c : config.dgp.time1) known.insert(c.name);
    std::vector<std::string> bad;
    for (const auto* spec : {&config.outcome, &config.propensity, &config.g0, &config.g1, &config.mu, &config.emu})
      for (const auto& name : spec->omit)
        if (!known.count(name)) bad.push_back("misspecification omits unknown covariate '" + name + "'");
    if (!bad.empty()) throw ConfigError(std::move(bad));
  }

  ExperimentReport report;
  report.design = config.dgp.design;
  report.n = config.n;
  report.replications_requested = config.replications;
  report.seed = config.seed;
  report.bounds = config.dgp.outcome.bounds;
  // The Monte Carlo truth stream is derived from the master seed but disjoint
  // from every replicate's stream.
  report.truth = true_value(config.dgp, config.truth, replicate_seed(config.seed, ~std::uint64_t{0}));

  const auto reps = static_cast<std::size_t>(config.replications);
  std::vector<std::vector<ReplicateEstimate>> slots(reps);
  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(reps));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < reps; r = next++)
      slots[r] = run_replicate(config, static_cast<int>(r), report.truth.value);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  for (auto& s : slots)
    for (auto& e : s) report.replicates.push_back(std::move(e));

  for (std::size_t k = 0; k < config.estimators.size(); ++k) {
    EstimatorSummary sum;
    sum.estimator = to_string(config.estimators[k]);
    std::vector<const ReplicateEstimate*> ok;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& e = report.replicates[r * config.estimators.size() + k];
      if (e.ok)
        ok.push_back(&e);
      else {
        ++sum.failures;
        if (is_glm_failure(e.error_kind)) ++sum.non_convergence;
      }
    }
    sum.successes = static_cast<int>(ok.size());
    if (!ok.empty()) {
      const double m = static_cast<double>(ok.size());
      double mean = 0.0, se = 0.0, cover = 0.0, width = 0.0;
      for (const auto* e : ok) {
        mean += e->psi_hat;
        se += e->se;
        cover += e->covered;
        width += e->ci95.hi - e->ci95.lo;
        sum.out_of_bounds += e->out_of_bounds;
      }
      mean /= m;
      double ss = 0.0;
      for (const auto* e : ok) ss += (e->psi_hat - mean) * (e->psi_hat - mean);
      sum.mean_estimate = mean;
      sum.mean_bias = mean - report.truth.value;
      sum.empirical_se = ok.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
      sum.bias_mc_se = sum.empirical_se / std::sqrt(m);
      sum.mean_estimated_se = se / m;
      sum.coverage = cover / m;
      sum.mean_ci_width = width / m;
      sum.prop_out_of_bounds = static_cast<double>(sum.out_of_bounds) / m;
    }
    report.estimators.push_back(sum);
  }
  return report;
}

}  // namespace tmle::sim
