#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tmle/dataset.hpp"
#include "tmle/estimators.hpp"
#include "tmle/longitudinal.hpp"
#include "tmle/nuisance.hpp"

namespace tmle::sim {

enum class Design { point, longitudinal };

// intercept + sum_k coefficient_k * value(variable_k); variables must be
// generated earlier in the structural order.
struct LinearPredictor {
  double intercept = 0.0;
  std::vector<std::pair<std::string, double>> coefficients;
};

enum class Distribution { bernoulli, uniform, normal };

struct CovariateSpec {
  std::string name;
  Distribution dist = Distribution::bernoulli;
  std::optional<double> p;  // bernoulli with a constant probability
  LinearPredictor lp;       // bernoulli: logit of P(=1) when p is absent; normal: mean
  double min = 0.0;         // uniform
  double max = 1.0;
  double sd = 1.0;          // normal
  double truncate_sd = 4.0; // normal draws are restricted to mean +/- truncate_sd * sd
};

// logit Pr(A = 1 | past) = lp.
struct TreatmentSpec {
  std::string name = "A";
  LinearPredictor lp;
};

enum class OutcomeType { binary, bounded_continuous };
enum class NoiseKind { none, uniform, beta };

struct OutcomeSpec {
  std::string name = "Y";
  OutcomeType type = OutcomeType::binary;
  Link link = Link::identity;  // identity: mean = lp; logit: mean = lo + (hi - lo) expit(lp)
  LinearPredictor lp;
  NoiseKind noise = NoiseKind::none;  // bounded_continuous only
  double half_width = 0.0;            // uniform noise
  double concentration = 10.0;        // beta noise
  OutcomeBounds bounds{0.0, 1.0};
};

struct DgpConfig {
  Design design = Design::point;
  std::vector<CovariateSpec> baseline;     // W (point) or W0 (longitudinal)
  TreatmentSpec treatment;                 // A or A0
  std::vector<CovariateSpec> time1;        // W1, longitudinal only
  std::optional<TreatmentSpec> treatment1; // A1, longitudinal only
  OutcomeSpec outcome;
  double positivity_floor = 0.01;
  std::optional<std::uint64_t> seed;

  // Throws ConfigError listing every violation.
  void validate() const;
  bool discrete() const;  // every covariate is Bernoulli
};

using GeneratedData = std::variant<Dataset, LongDataset>;

GeneratedData generate(const DgpConfig& dgp, Eigen::Index n, std::uint64_t seed);
Dataset generate_point(const DgpConfig& dgp, Eigen::Index n, std::uint64_t seed);
LongDataset generate_long(const DgpConfig& dgp, Eigen::Index n, std::uint64_t seed);

// Structural mean E(Y | history) for a full assignment of variable values in
// structural order (covariates, A, [W1..., A1]).
double structural_mean(const DgpConfig& dgp, const std::map<std::string, double>& values);

enum class TruthMethod { analytic, monte_carlo };

struct TruthSpec {
  std::optional<TruthMethod> method;  // absent: analytic when the DGP is discrete
  std::int64_t draws = 1'000'000;
  std::optional<double> max_se;       // monte_carlo only
};

struct TruthValue {
  double value = 0.0;
  TruthMethod method = TruthMethod::analytic;
  double mc_se = 0.0;
  std::int64_t draws = 0;
};

TruthValue true_value_analytic(const DgpConfig& dgp);
TruthValue true_value_monte_carlo(const DgpConfig& dgp, std::int64_t draws, std::uint64_t seed,
                                  std::optional<double> max_se = std::nullopt);
TruthValue true_value(const DgpConfig& dgp, const TruthSpec& spec, std::uint64_t seed);

// A nuisance learner plus an optional named misspecification recipe.
struct NuisanceSpec {
  LearnerSpec learner;
  std::vector<std::string> omit;  // covariates dropped from this nuisance only
  std::optional<Link> wrong_link;

  bool misspecified() const { return !omit.empty() || wrong_link.has_value(); }
  // The learner actually fitted, given the dataset's covariate names.
  LearnerSpec resolve(const std::vector<std::string>& covariate_names) const;
};

struct ExperimentConfig {
  DgpConfig dgp;
  Eigen::Index n = 500;
  int replications = 100;
  std::vector<EstimatorKind> estimators = all_estimators();
  // Point design.
  NuisanceSpec outcome{LearnerSpec::glm(), {}, {}};
  NuisanceSpec propensity{LearnerSpec::glm(Link::logit), {}, {}};
  // Longitudinal design.
  NuisanceSpec g0{LearnerSpec::glm(Link::logit), {}, {}};
  NuisanceSpec g1{LearnerSpec::glm(Link::logit), {}, {}};
  NuisanceSpec mu{LearnerSpec::glm(), {}, {}};
  NuisanceSpec emu{LearnerSpec::glm(), {}, {}};
  Truncation truncation;
  std::optional<int> folds;
  std::uint64_t seed = 0;
  TruthSpec truth;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Counter-based seed for replicate r under a master seed.
std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate);

struct ReplicateEstimate {
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  bool ok = false;
  double psi_hat = 0.0;
  double se = 0.0;
  Interval ci95;
  bool covered = false;
  bool out_of_bounds = false;
  std::string error_kind;
  std::string error;
};

struct EstimatorSummary {
  std::string estimator;
  int successes = 0;
  int failures = 0;
  int non_convergence = 0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;
  double empirical_se = 0.0;
  double bias_mc_se = 0.0;  // empirical_se / sqrt(successes)
  double mean_estimated_se = 0.0;
  double coverage = 0.0;
  double mean_ci_width = 0.0;
  double prop_out_of_bounds = 0.0;
  int out_of_bounds = 0;
};

struct ExperimentReport {
  Design design = Design::point;
  Eigen::Index n = 0;
  int replications_requested = 0;
  std::uint64_t seed = 0;
  TruthValue truth;
  OutcomeBounds bounds;
  std::vector<EstimatorSummary> estimators;
  std::vector<ReplicateEstimate> replicates;  // replicate-major, estimator order as configured

  const EstimatorSummary& summary(const std::string& estimator) const;
};

// Estimates for one generated dataset, in config.estimators order. Failures are
// recorded in the entries, never thrown.
std::vector<ReplicateEstimate> run_replicate(const ExperimentConfig& config, int replicate, double truth);

ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace tmle::sim
