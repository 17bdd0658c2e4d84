#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmle/dataset.hpp"
#include "tmle/nuisance.hpp"

namespace tmle {

// Two-sided 95% standard normal quantile.
inline constexpr double kZ975 = 1.959963984540054;

enum class Fluctuation { covariate_linear, weighted_linear, weighted_logistic };

enum class EstimatorKind { gcomp, one_step, tmle_covariate_linear, tmle_weighted_linear, tmle_weighted_logistic };

const char* to_string(Fluctuation f);
const char* to_string(EstimatorKind k);
EstimatorKind parse_estimator(const std::string& name);
std::optional<Fluctuation> fluctuation_of(EstimatorKind k);
inline const std::vector<EstimatorKind>& all_estimators() {
  static const std::vector<EstimatorKind> all{EstimatorKind::gcomp, EstimatorKind::one_step,
                                              EstimatorKind::tmle_covariate_linear,
                                              EstimatorKind::tmle_weighted_linear,
                                              EstimatorKind::tmle_weighted_logistic};
  return all;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Inference {
  double se = 0.0;
  Interval ci95;
};

// One targeting (fluctuation) fit. For weighted_logistic the score residual is
// on the [0, 1]-scaled outcome.
struct TargetingStep {
  std::string name;
  std::string response;  // pseudo-outcome that was targeted
  double coefficient = 0.0;
  double score_residual = 0.0;
  double weight_sum = 0.0;
  int iterations = 0;
};

struct Diagnostics {
  double mean_eif = 0.0;
  std::vector<TargetingStep> targeting;
  double min_prediction = 0.0;  // of the predictions the estimate averages
  double max_prediction = 0.0;
  int truncation_hits = 0;
  std::optional<OutcomeBounds> outcome_bounds;
  std::vector<std::string> notes;
  std::vector<std::string> trace;
};

struct EstimateResult {
  std::string estimator;
  double psi_hat = 0.0;
  double se = 0.0;
  Interval ci95;
  Eigen::VectorXd eif;
  Diagnostics diagnostics;
};

struct FluctuationFit {
  Fluctuation variant = Fluctuation::weighted_linear;
  double coefficient = 0.0;
  Eigen::VectorXd targeted_pred;
  double score_residual = 0.0;
  double weight_sum = 0.0;
  int iterations = 0;
};

// Clever covariate I(A_i = 0) / Pr(A = 0 | W_i).
Eigen::VectorXd clever_covariate(const Eigen::VectorXi& treatment, const Eigen::VectorXd& propensity);

Eigen::VectorXd eif_values(const Dataset& data, const Eigen::VectorXd& outcome_pred,
                           const Eigen::VectorXd& propensity_pred, double psi);

// se = sqrt(sample variance(eif) / n) with the n - 1 divisor; psi +/- z se.
Inference wald_inference(const Eigen::VectorXd& eif, double psi_hat);

EstimateResult gcomp(const Dataset& data, const NuisanceEstimates& nuisance);
EstimateResult one_step(const Dataset& data, const NuisanceEstimates& nuisance);

struct TmleOptions {
  std::optional<OutcomeBounds> bounds;  // weighted_logistic scaling; default data.outcome_bounds()
};

// Targeting model solving sum_i H_i (Y_i - E*_i) = 0.
FluctuationFit fluctuate(const Dataset& data, const NuisanceEstimates& nuisance, Fluctuation variant,
                         const TmleOptions& options = {});

EstimateResult tmle(const Dataset& data, const NuisanceEstimates& nuisance, Fluctuation variant,
                    const TmleOptions& options = {});

EstimateResult estimate(const Dataset& data, const NuisanceEstimates& nuisance, EstimatorKind kind,
                        const TmleOptions& options = {});

// Intercept-only logistic fluctuation of a [0,1]-scaled pseudo-outcome with an
// offset of logit(scaled initial predictions). Shared by the point and
// longitudinal estimators. Returns targeted predictions on the original scale.
struct ScaledLogisticFit {
  double coefficient = 0.0;
  Eigen::VectorXd targeted;  // original scale
  double score_residual = 0.0;
  int iterations = 0;
};
ScaledLogisticFit logistic_fluctuation(const Eigen::VectorXd& response, const Eigen::VectorXd& initial,
                                       const Eigen::VectorXd& weights, const OutcomeBounds& bounds);

}  // namespace tmle
