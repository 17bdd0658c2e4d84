#include "tmle/longitudinal.hpp"

#include <string>

#include "tmle/errors.hpp"
#include "tmle/glm.hpp"

namespace tmle {
namespace {

std::vector<Eigen::Index> where(const std::vector<bool>& mask) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

Eigen::VectorXd rows_of(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = v(rows[r]);
  return out;
}

// Training rows for a fit, split into (train, predict) per fold. Without folds
// a single split trains on every eligible row and predicts all rows.
struct Split {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> predict;
  int fold = -1;
};

std::vector<Split> splits(const std::vector<bool>& eligible, const std::optional<std::vector<int>>& folds) {
  const auto n = static_cast<Eigen::Index>(eligible.size());
  std::vector<Split> out;
  if (!folds) {
    Split s;
    s.train = where(eligible);
    for (Eigen::Index i = 0; i < n; ++i) s.predict.push_back(i);
    out.push_back(std::move(s));
    return out;
  }
  int k = 0;
  for (int f : *folds) k = std::max(k, f + 1);
  for (int f = 0; f < k; ++f) {
    Split s;
    s.fold = f;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((*folds)[static_cast<std::size_t>(i)] == f)
        s.predict.push_back(i);
      else if (eligible[static_cast<std::size_t>(i)])
        s.train.push_back(i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

[[noreturn]] void too_small(const Split& s, const std::string& what) {
  if (s.fold >= 0) throw FoldDegeneracyError(static_cast<std::size_t>(s.fold), what);
  throw InsufficientDataError(what);
}

// Regression of response on covariates among eligible rows, predicted for all rows.
Eigen::VectorXd fit_predict(const LearnerSpec& learner, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                            const Eigen::VectorXd& response, const std::vector<bool>& eligible, Link default_link,
                            const std::optional<std::vector<int>>& folds, const std::string& what) {
  Eigen::VectorXd out(x.rows());
  for (const auto& s : splits(eligible, folds)) {
    if (s.train.size() < 2) too_small(s, what + " has fewer than 2 training rows");
    const auto model = NuisanceModel::fit(learner, rows_of(x, s.train), names, rows_of(response, s.train), default_link);
    Eigen::VectorXd pred = model.predict(rows_of(x, s.predict));
    if (model.link() == Link::logit) pred = pred.cwiseMax(kOutcomeClip).cwiseMin(1.0 - kOutcomeClip);
    for (std::size_t r = 0; r < s.predict.size(); ++r) out(s.predict[r]) = pred(static_cast<Eigen::Index>(r));
  }
  return out;
}

// Pr(A = 0 | x) among eligible rows. A conditioning set in which nobody is
// treated gives probability 1 exactly (and is left untruncated).
Eigen::VectorXd fit_propensity_long(const LearnerSpec& learner, const Eigen::MatrixXd& x,
                                    const std::vector<std::string>& names, const Eigen::VectorXi& a,
                                    const std::vector<bool>& eligible, const Truncation& truncation,
                                    const std::optional<std::vector<int>>& folds, const std::string& what,
                                    int& hits, bool& degenerate) {
  Eigen::VectorXd out(x.rows());
  const Eigen::VectorXd untreated = (a.array() == 0).cast<double>();
  degenerate = false;
  for (const auto& s : splits(eligible, folds)) {
    Eigen::Index zeros = 0;
    for (auto i : s.train) zeros += a(i) == 0;
    if (zeros == 0) too_small(s, what + ": no untreated rows in its conditioning set");
    if (zeros == static_cast<Eigen::Index>(s.train.size())) {
      degenerate = true;
      for (auto i : s.predict) out(i) = 1.0;
      continue;
    }
    const auto model = NuisanceModel::fit(learner, rows_of(x, s.train), names, rows_of(untreated, s.train), Link::logit);
    Eigen::VectorXd pred = model.predict(rows_of(x, s.predict));
    hits += truncate(pred, truncation);
    for (std::size_t r = 0; r < s.predict.size(); ++r) out(s.predict[r]) = pred(static_cast<Eigen::Index>(r));
  }
  return out;
}

std::vector<bool> mask_untreated0(const LongDataset& d) {
  std::vector<bool> m(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) m[static_cast<std::size_t>(i)] = d.treatment0(i) == 0;
  return m;
}

std::vector<bool> mask_untreated_both(const LongDataset& d) {
  std::vector<bool> m(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i)
    m[static_cast<std::size_t>(i)] = d.treatment0(i) == 0 && d.treatment1(i) == 0;
  return m;
}

struct StepFit {
  Eigen::VectorXd targeted;
  double coefficient = 0.0;
  double score_residual = 0.0;
  int iterations = 0;
};

// One targeting step: pseudo-outcome `response`, initial predictions as offset,
// clever weights h. The covariate variant updates every row's prediction by
// h_regime, the clever covariate with the treatments set to the regime.
StepFit target_step(const Eigen::VectorXd& response, const Eigen::VectorXd& initial, const Eigen::VectorXd& h,
                    const Eigen::VectorXd& h_regime, Fluctuation variant, const OutcomeBounds& bounds) {
  const auto n = response.size();
  StepFit out;
  switch (variant) {
    case Fluctuation::weighted_linear: {
      const auto fit = fit_glm(DesignSpec<double>::intercept_only(n), response, Link::identity, initial, h);
      out.coefficient = fit.coefficients(0);
      out.targeted = (initial.array() + out.coefficient).matrix();
      out.score_residual = fit.score_residuals(0);
      out.iterations = fit.iterations;
      break;
    }
    case Fluctuation::covariate_linear: {
      const auto fit = fit_glm(DesignSpec<double>::from_columns({"H"}, h, false), response, Link::identity, initial);
      out.coefficient = fit.coefficients(0);
      out.targeted = initial + out.coefficient * h_regime;
      out.score_residual = fit.score_residuals(0);
      out.iterations = fit.iterations;
      break;
    }
    case Fluctuation::weighted_logistic: {
      const auto fit = logistic_fluctuation(response, initial, h, bounds);
      out.coefficient = fit.coefficient;
      out.targeted = fit.targeted;
      out.score_residual = fit.score_residual;
      out.iterations = fit.iterations;
      break;
    }
  }
  return out;
}

// Step 4: E(pseudo | W0, A0 = 0) for all rows. The logistic variant regresses
// the [0, 1]-scaled pseudo-outcome with a logit link by default.
Eigen::VectorXd regress_on_baseline(const LongDataset& data, const LearnerSpec& learner, const Eigen::VectorXd& pseudo,
                                    const std::optional<std::vector<int>>& folds, bool scaled,
                                    const OutcomeBounds& bounds) {
  const auto eligible = mask_untreated0(data);
  if (!scaled)
    return fit_predict(learner, data.baseline, data.baseline_names, pseudo, eligible, Link::identity, folds,
                       "step 4 outcome model E(mu*|W0,A0=0)");
  const double range = bounds.hi - bounds.lo;
  if (!(range > 0.0)) {
    // Degenerate bounds: the pseudo-outcome is constant.
    return Eigen::VectorXd::Constant(data.size(), bounds.lo);
  }
  const Eigen::VectorXd z = ((pseudo.array() - bounds.lo) / range).cwiseMax(0.0).cwiseMin(1.0).matrix();
  const Eigen::VectorXd pred = fit_predict(learner, data.baseline, data.baseline_names, z, eligible, Link::logit,
                                           folds, "step 4 outcome model E(mu*|W0,A0=0)");
  return (bounds.lo + range * pred.array()).matrix();
}

std::string step_context(int step, Fluctuation variant) {
  return "tmle_long[" + std::string(to_string(variant)) + "] step " + std::to_string(step);
}

EstimateResult finish_long(std::string tag, double theta, Eigen::VectorXd eif, const Eigen::VectorXd& averaged,
                           int hits) {
  EstimateResult r;
  r.estimator = std::move(tag);
  r.psi_hat = theta;
  const auto inf = wald_inference(eif, theta);
  r.se = inf.se;
  r.ci95 = inf.ci95;
  r.diagnostics.mean_eif = eif.mean();
  r.diagnostics.min_prediction = averaged.minCoeff();
  r.diagnostics.max_prediction = averaged.maxCoeff();
  r.diagnostics.truncation_hits = hits;
  r.eif = std::move(eif);
  return r;
}

}  // namespace

InitialLongFits fit_initial_long(const LongDataset& data, const LongLearners& learners, const LongOptions& options) {
  data.validate();
  options.truncation.validate();
  InitialLongFits out;
  if (options.folds && *options.folds > 1) out.fold_assignment = make_folds(data.size(), *options.folds, options.seed);

  const std::vector<bool> everyone(static_cast<std::size_t>(data.size()), true);
  bool g0_degenerate = false;
  try {
    out.g0 = fit_propensity_long(learners.g0, data.baseline, data.baseline_names, data.treatment0, everyone,
                                 options.truncation, out.fold_assignment, "g0 = Pr(A0=0|W0)", out.truncation_hits,
                                 g0_degenerate);
    out.g1 = fit_propensity_long(learners.g1, data.history(), data.history_names(), data.treatment1,
                                 mask_untreated0(data), options.truncation, out.fold_assignment,
                                 "g1 = Pr(A1=0|W0,A0=0,W1)", out.truncation_hits, out.g1_degenerate);
  } catch (const GlmError& e) {
    throw EstimationError("tmle_long step 1", e);
  }

  const Link mu_link = learners.mu.link.value_or(Link::identity);
  try {
    out.mu_hat = fit_predict(learners.mu, data.history(), data.history_names(), data.outcome,
                             mask_untreated_both(data), mu_link, out.fold_assignment,
                             "step 2 outcome model E(Y|W0,A0=0,W1,A1=0)");
  } catch (const GlmError& e) {
    throw EstimationError("tmle_long step 2", e);
  }
  return out;
}

double eif_long_row(int a0, int a1, double y, double g0, double g1, double mu, double emu, double theta) {
  double phi = emu - theta;
  if (a0 == 0) {
    phi += (mu - emu) / g0;
    if (a1 == 0) phi += (y - mu) / (g0 * g1);
  }
  return phi;
}

Eigen::VectorXd eif_long(const LongDataset& data, const Eigen::VectorXd& g0, const Eigen::VectorXd& g1,
                         const Eigen::VectorXd& mu, const Eigen::VectorXd& emu, double theta) {
  const auto n = data.size();
  if (g0.size() != n || g1.size() != n || mu.size() != n || emu.size() != n)
    throw DimensionError("eif_long: nuisance vectors must have one entry per observation");
  Eigen::VectorXd phi(n);
  for (Eigen::Index i = 0; i < n; ++i)
    phi(i) = eif_long_row(data.treatment0(i), data.treatment1(i), data.outcome(i), g0(i), g1(i), mu(i), emu(i), theta);
  return phi;
}

Eigen::VectorXd eif_long(const LongDataset& data, const SequentialNuisances& nuisances, double theta) {
  return eif_long(data, nuisances.g0, nuisances.g1, nuisances.mu_star, nuisances.emu_star, theta);
}

Eigen::VectorXd step3_weights(const LongDataset& data, const Eigen::VectorXd& g0, const Eigen::VectorXd& g1) {
  Eigen::VectorXd h(data.size());
  for (Eigen::Index i = 0; i < h.size(); ++i)
    h(i) = data.treatment0(i) == 0 && data.treatment1(i) == 0 ? 1.0 / (g0(i) * g1(i)) : 0.0;
  return h;
}

Eigen::VectorXd step5_weights(const LongDataset& data, const Eigen::VectorXd& g0) {
  Eigen::VectorXd h(data.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = data.treatment0(i) == 0 ? 1.0 / g0(i) : 0.0;
  return h;
}

LongResult target_long(const LongDataset& data, const InitialLongFits& initial, const LearnerSpec& emu_learner,
                       const LongOptions& options, Fluctuation variant) {
  const bool logistic = variant == Fluctuation::weighted_logistic;
  const OutcomeBounds bounds = options.bounds.value_or(data.outcome_bounds());
  if (!(bounds.lo <= bounds.hi)) throw InputError("outcome bounds must satisfy lo <= hi");

  LongResult result;
  auto& nu = result.nuisances;
  nu.g0 = initial.g0;
  nu.g1 = initial.g1;
  nu.mu_hat = initial.mu_hat;
  const Eigen::VectorXd h1 = step3_weights(data, nu.g0, nu.g1);
  const Eigen::VectorXd h0 = step5_weights(data, nu.g0);
  const Eigen::VectorXd h1_regime = (nu.g0.array() * nu.g1.array()).inverse().matrix();
  const Eigen::VectorXd h0_regime = nu.g0.array().inverse().matrix();

  StepFit step3, step5;
  try {
    step3 = target_step(data.outcome, nu.mu_hat, h1, h1_regime, variant, bounds);
  } catch (const GlmError& e) {
    throw EstimationError(step_context(3, variant), e);
  }
  nu.mu_star = step3.targeted;
  nu.gamma0 = step3.coefficient;

  try {
    nu.emu_hat = regress_on_baseline(data, emu_learner, nu.mu_star, initial.fold_assignment, logistic, bounds);
  } catch (const GlmError& e) {
    throw EstimationError(step_context(4, variant), e);
  }

  nu.step5_response = nu.mu_star;
  try {
    step5 = target_step(nu.step5_response, nu.emu_hat, h0, h0_regime, variant, bounds);
  } catch (const GlmError& e) {
    throw EstimationError(step_context(5, variant), e);
  }
  nu.emu_star = step5.targeted;
  nu.gamma1 = step5.coefficient;

  const double theta = nu.emu_star.mean();
  auto& est = result.estimate;
  est = finish_long(std::string("tmle_") + to_string(variant), theta, eif_long(data, nu, theta), nu.emu_star,
                    initial.truncation_hits);
  est.diagnostics.targeting.push_back({"step3", "Y", step3.coefficient, step3.score_residual, h1.sum(), step3.iterations});
  est.diagnostics.targeting.push_back(
      {"step5", "mu_star", step5.coefficient, step5.score_residual, h0.sum(), step5.iterations});
  if (logistic) est.diagnostics.outcome_bounds = bounds;
  est.diagnostics.trace = {
      "step1: propensity models g0 = Pr(A0=0|W0), g1 = Pr(A1=0|W0,A0=0,W1)",
      "step2: outcome model mu_hat = E(Y|W0,A0=0,W1,A1=0) on A0=A1=0 rows",
      std::string("step3: ") + to_string(variant) + " targeting of Y, offset mu_hat, clever term I(A0=A1=0)/(g0 g1) -> mu_star",
      "step4: regression of mu_star on W0 among A0=0 rows -> emu_hat",
      std::string("step5: ") + to_string(variant) + " targeting of mu_star, offset emu_hat, clever term I(A0=0)/g0 -> emu_star",
      "step6: theta = mean(emu_star)"};
  if (initial.g1_degenerate) est.diagnostics.notes.push_back("no A0=0 row received A1=1; g1 set to 1");
  if (initial.fold_assignment) est.diagnostics.notes.push_back("nuisances cross-fit on a shared fold partition");
  return result;
}

LongResult tmle_long(const LongDataset& data, const LongLearners& learners, const LongOptions& options,
                     Fluctuation variant) {
  const auto initial = fit_initial_long(data, learners, options);
  return target_long(data, initial, learners.emu, options, variant);
}

LongResult tmle_long_weighted_logistic(const LongDataset& data, const LongLearners& learners,
                                       const LongOptions& options) {
  return tmle_long(data, learners, options, Fluctuation::weighted_logistic);
}

EstimateResult gcomp_long(const LongDataset& data, const InitialLongFits& initial, const LearnerSpec& emu_learner,
                          const LongOptions& options) {
  const auto bounds = options.bounds.value_or(data.outcome_bounds());
  Eigen::VectorXd emu;
  try {
    emu = regress_on_baseline(data, emu_learner, initial.mu_hat, initial.fold_assignment, false, bounds);
  } catch (const GlmError& e) {
    throw EstimationError("gcomp_long step 4", e);
  }
  const double theta = emu.mean();
  auto r = finish_long("gcomp", theta, eif_long(data, initial.g0, initial.g1, initial.mu_hat, emu, theta), emu,
                       initial.truncation_hits);
  r.diagnostics.notes.push_back(
      "standard error uses the plug-in EIF; it is not theoretically valid when the outcome models are data-adaptive");
  return r;
}

EstimateResult one_step_long(const LongDataset& data, const InitialLongFits& initial, const LearnerSpec& emu_learner,
                             const LongOptions& options) {
  const auto bounds = options.bounds.value_or(data.outcome_bounds());
  Eigen::VectorXd emu;
  try {
    emu = regress_on_baseline(data, emu_learner, initial.mu_hat, initial.fold_assignment, false, bounds);
  } catch (const GlmError& e) {
    throw EstimationError("one_step_long step 4", e);
  }
  const Eigen::VectorXd h1 = step3_weights(data, initial.g0, initial.g1);
  const Eigen::VectorXd h0 = step5_weights(data, initial.g0);
  const Eigen::VectorXd augmented = (emu.array() + h0.array() * (initial.mu_hat - emu).array() +
                                     h1.array() * (data.outcome - initial.mu_hat).array())
                                        .matrix();
  const double theta = augmented.mean();
  return finish_long("one_step", theta, eif_long(data, initial.g0, initial.g1, initial.mu_hat, emu, theta), augmented,
                     initial.truncation_hits);
}

EstimateResult estimate_long(const LongDataset& data, const InitialLongFits& initial, const LongLearners& learners,
                             const LongOptions& options, EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::gcomp: return gcomp_long(data, initial, learners.emu, options);
    case EstimatorKind::one_step: return one_step_long(data, initial, learners.emu, options);
    default: return target_long(data, initial, learners.emu, options, *fluctuation_of(kind)).estimate;
  }
}

}  // namespace tmle
