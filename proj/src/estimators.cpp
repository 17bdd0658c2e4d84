#include "tmle/estimators.hpp"

#include <cmath>

#include "tmle/errors.hpp"
#include "tmle/glm.hpp"

namespace tmle {
namespace {

void check_nuisance(const Dataset& data, const NuisanceEstimates& nuisance) {
  data.validate();
  const auto n = data.size();
  if (nuisance.outcome_pred.size() != n || nuisance.propensity_pred.size() != n)
    throw DimensionError("nuisance predictions must have one entry per observation");
  if (!nuisance.outcome_pred.allFinite()) throw InputError("outcome predictions must be finite");
  if (!((nuisance.propensity_pred.array() > 0.0) && (nuisance.propensity_pred.array() < 1.0)).all())
    throw InputError("propensity predictions must lie strictly inside (0, 1)");
}

EstimateResult finish(std::string tag, double psi, Eigen::VectorXd eif, const Eigen::VectorXd& averaged,
                      const NuisanceEstimates& nuisance) {
  EstimateResult r;
  r.estimator = std::move(tag);
  r.psi_hat = psi;
  const auto inf = wald_inference(eif, psi);
  r.se = inf.se;
  r.ci95 = inf.ci95;
  r.diagnostics.mean_eif = eif.mean();
  r.diagnostics.min_prediction = averaged.minCoeff();
  r.diagnostics.max_prediction = averaged.maxCoeff();
  r.diagnostics.truncation_hits = nuisance.truncation_hits;
  r.eif = std::move(eif);
  return r;
}

bool all_close(const Eigen::VectorXd& v, double c) {
  const double tol = 1e-9 * std::max(1.0, std::abs(c));
  return ((v.array() - c).abs() <= tol).all();
}

}  // namespace

const char* to_string(Fluctuation f) {
  switch (f) {
    case Fluctuation::covariate_linear: return "covariate_linear";
    case Fluctuation::weighted_linear: return "weighted_linear";
    case Fluctuation::weighted_logistic: return "weighted_logistic";
  }
  return "?";
}

const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::gcomp: return "gcomp";
    case EstimatorKind::one_step: return "one_step";
    case EstimatorKind::tmle_covariate_linear: return "tmle_covariate_linear";
    case EstimatorKind::tmle_weighted_linear: return "tmle_weighted_linear";
    case EstimatorKind::tmle_weighted_logistic: return "tmle_weighted_logistic";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& name) {
  for (auto k : all_estimators())
    if (name == to_string(k)) return k;
  if (name == "aipw") return EstimatorKind::one_step;
  throw InputError("unknown estimator '" + name + "'");
}

std::optional<Fluctuation> fluctuation_of(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::tmle_covariate_linear: return Fluctuation::covariate_linear;
    case EstimatorKind::tmle_weighted_linear: return Fluctuation::weighted_linear;
    case EstimatorKind::tmle_weighted_logistic: return Fluctuation::weighted_logistic;
    default: return std::nullopt;
  }
}

Eigen::VectorXd clever_covariate(const Eigen::VectorXi& treatment, const Eigen::VectorXd& propensity) {
  if (treatment.size() != propensity.size()) throw DimensionError("treatment and propensity differ in length");
  Eigen::VectorXd h(treatment.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = treatment(i) == 0 ? 1.0 / propensity(i) : 0.0;
  return h;
}

Eigen::VectorXd eif_values(const Dataset& data, const Eigen::VectorXd& outcome_pred,
                           const Eigen::VectorXd& propensity_pred, double psi) {
  const auto n = data.size();
  if (outcome_pred.size() != n || propensity_pred.size() != n)
    throw DimensionError("eif_values: predictions must have one entry per observation");
  const Eigen::VectorXd h = clever_covariate(data.treatment, propensity_pred);
  return (h.array() * (data.outcome - outcome_pred).array() + outcome_pred.array() - psi).matrix();
}

Inference wald_inference(const Eigen::VectorXd& eif, double psi_hat) {
  const auto n = eif.size();
  if (n < 2) throw InputError("wald_inference needs at least 2 EIF values");
  const double mean = eif.mean();
  const double var = (eif.array() - mean).square().sum() / static_cast<double>(n - 1);
  Inference out;
  out.se = std::sqrt(var / static_cast<double>(n));
  out.ci95 = {psi_hat - kZ975 * out.se, psi_hat + kZ975 * out.se};
  return out;
}

EstimateResult gcomp(const Dataset& data, const NuisanceEstimates& nuisance) {
  check_nuisance(data, nuisance);
  const Eigen::VectorXd& q = nuisance.outcome_pred;
  const double psi = q.mean();
  auto r = finish("gcomp", psi, eif_values(data, q, nuisance.propensity_pred, psi), q, nuisance);
  r.diagnostics.notes.push_back(
      "standard error uses the plug-in EIF; it is not theoretically valid when the outcome model is data-adaptive");
  return r;
}

EstimateResult one_step(const Dataset& data, const NuisanceEstimates& nuisance) {
  check_nuisance(data, nuisance);
  const Eigen::VectorXd& q = nuisance.outcome_pred;
  const Eigen::VectorXd h = clever_covariate(data.treatment, nuisance.propensity_pred);
  const Eigen::VectorXd augmented = (h.array() * (data.outcome - q).array() + q.array()).matrix();
  const double psi = augmented.mean();
  return finish("one_step", psi, eif_values(data, q, nuisance.propensity_pred, psi), augmented, nuisance);
}

ScaledLogisticFit logistic_fluctuation(const Eigen::VectorXd& response, const Eigen::VectorXd& initial,
                                       const Eigen::VectorXd& weights, const OutcomeBounds& bounds) {
  const auto n = response.size();
  if (initial.size() != n || weights.size() != n) throw DimensionError("logistic fluctuation: length mismatch");
  if (!(bounds.lo <= bounds.hi)) throw InputError("outcome bounds must satisfy lo <= hi");
  ScaledLogisticFit out;
  if (bounds.lo == bounds.hi) {
    // A single-point parameter space: only E* = lo respects it, and it solves
    // the score equation exactly when the data agree.
    if (!all_close(response, bounds.lo) || !all_close(initial, bounds.lo))
      throw DegenerateOutcomeError("outcome bounds are degenerate (y_min = y_max) but the data vary");
    out.targeted = Eigen::VectorXd::Constant(n, bounds.lo);
    out.score_residual = (weights.array() * (response.array() - bounds.lo)).sum();
    return out;
  }
  const double range = bounds.hi - bounds.lo;
  const double slack = 1e-12 * std::max(1.0, range);
  Eigen::VectorXd z(n);
  Eigen::VectorXd offset(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights(i) > 0.0 && (response(i) < bounds.lo - slack || response(i) > bounds.hi + slack))
      throw InputError("logistic fluctuation: pseudo-outcome at row " + std::to_string(i) + " lies outside bounds");
    z(i) = std::clamp((response(i) - bounds.lo) / range, 0.0, 1.0);
    const double init = std::clamp((initial(i) - bounds.lo) / range, kOutcomeClip, 1.0 - kOutcomeClip);
    offset(i) = logit(init);
  }
  const auto fit = fit_glm(DesignSpec<double>::intercept_only(n), z, Link::logit, offset, weights);
  out.coefficient = fit.coefficients(0);
  out.score_residual = fit.score_residuals(0);
  out.iterations = fit.iterations;
  out.targeted.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.targeted(i) = bounds.lo + range * expit(offset(i) + out.coefficient);
  return out;
}

FluctuationFit fluctuate(const Dataset& data, const NuisanceEstimates& nuisance, Fluctuation variant,
                         const TmleOptions& options) {
  check_nuisance(data, nuisance);
  const auto n = data.size();
  const Eigen::VectorXd& q = nuisance.outcome_pred;
  const Eigen::VectorXd h = clever_covariate(data.treatment, nuisance.propensity_pred);
  FluctuationFit out;
  out.variant = variant;
  out.weight_sum = h.sum();
  try {
    switch (variant) {
      case Fluctuation::covariate_linear: {
        const auto design = DesignSpec<double>::from_columns({"H"}, h, false);
        const auto fit = fit_glm(design, data.outcome, Link::identity, q);
        out.coefficient = fit.coefficients(0);
        // E*(Y | A=0, W_i) evaluates the covariate at A = 0 for every row.
        out.targeted_pred = (q.array() + out.coefficient / nuisance.propensity_pred.array()).matrix();
        out.score_residual = fit.score_residuals(0);
        out.iterations = fit.iterations;
        break;
      }
      case Fluctuation::weighted_linear: {
        const auto fit = fit_glm(DesignSpec<double>::intercept_only(n), data.outcome, Link::identity, q, h);
        out.coefficient = fit.coefficients(0);
        out.targeted_pred = (q.array() + out.coefficient).matrix();
        out.score_residual = fit.score_residuals(0);
        out.iterations = fit.iterations;
        break;
      }
      case Fluctuation::weighted_logistic: {
        const auto bounds = options.bounds.value_or(data.outcome_bounds());
        const auto fit = logistic_fluctuation(data.outcome, q, h, bounds);
        out.coefficient = fit.coefficient;
        out.targeted_pred = fit.targeted;
        out.score_residual = fit.score_residual;
        out.iterations = fit.iterations;
        break;
      }
    }
  } catch (const GlmError& e) {
    throw EstimationError(std::string("tmle[") + to_string(variant) + "] targeting model", e);
  }
  return out;
}

EstimateResult tmle(const Dataset& data, const NuisanceEstimates& nuisance, Fluctuation variant,
                    const TmleOptions& options) {
  const auto fl = fluctuate(data, nuisance, variant, options);
  const double psi = fl.targeted_pred.mean();
  auto r = finish(std::string("tmle_") + to_string(variant), psi,
                  eif_values(data, fl.targeted_pred, nuisance.propensity_pred, psi), fl.targeted_pred, nuisance);
  r.diagnostics.targeting.push_back(
      {to_string(variant), "Y", fl.coefficient, fl.score_residual, fl.weight_sum, fl.iterations});
  if (variant == Fluctuation::weighted_logistic) r.diagnostics.outcome_bounds = options.bounds.value_or(data.outcome_bounds());
  return r;
}

EstimateResult estimate(const Dataset& data, const NuisanceEstimates& nuisance, EstimatorKind kind,
                        const TmleOptions& options) {
  switch (kind) {
    case EstimatorKind::gcomp: return gcomp(data, nuisance);
    case EstimatorKind::one_step: return one_step(data, nuisance);
    default: return tmle(data, nuisance, *fluctuation_of(kind), options);
  }
}

}  // namespace tmle
