#pragma once

// Maximum-likelihood GLMs with canonical links, per-observation offsets and
// per-observation weights. The estimating equations solved here are
//
//   sum_i w_i x_ij (z_i - g^{-1}(b_i + x_i' beta)) = 0   for every column j,
//
// which is what the targeting steps rely on. Identity link is solved in closed
// form; logit by Newton/IRLS with step-halving.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmle/errors.hpp"

namespace tmle {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Link { identity, logit };

inline const char* to_string(Link link) { return link == Link::identity ? "identity" : "logit"; }

template <typename Scalar>
Scalar expit(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar logit(Scalar p) {
  return std::log(p) - std::log1p(-p);
}

// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar log1pexp(Scalar x) {
  if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar inverse_link(Link link, Scalar eta) {
  return link == Link::identity ? eta : expit(eta);
}

// Covariate columns f(X) of a GLM, optionally preceded by an intercept.
template <typename Scalar>
struct DesignSpec {
  std::vector<std::string> names;
  MatrixX<Scalar> columns;  // n x p
  bool include_intercept = true;

  static DesignSpec intercept_only(Eigen::Index n) {
    return DesignSpec{{}, MatrixX<Scalar>(n, 0), true};
  }

  static DesignSpec from_columns(std::vector<std::string> names, MatrixX<Scalar> columns,
                                 bool include_intercept) {
    if (static_cast<Eigen::Index>(names.size()) != columns.cols())
      throw DimensionError("design: " + std::to_string(names.size()) + " names for " +
                           std::to_string(columns.cols()) + " columns");
    return DesignSpec{std::move(names), std::move(columns), include_intercept};
  }

  Eigen::Index rows() const { return columns.rows(); }
  Eigen::Index parameters() const { return columns.cols() + (include_intercept ? 1 : 0); }

  MatrixX<Scalar> model_matrix() const {
    if (!include_intercept) return columns;
    MatrixX<Scalar> x(rows(), parameters());
    x.col(0).setOnes();
    x.rightCols(columns.cols()) = columns;
    return x;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    if (include_intercept) out.emplace_back("(intercept)");
    out.insert(out.end(), names.begin(), names.end());
    return out;
  }
};

template <typename Scalar>
struct GlmOptions {
  Scalar score_tolerance = Scalar(1e-8);  // relative to 1 + sum of weights
  int max_iterations = 100;
  Scalar separation_norm = Scalar(1e3);
  int max_step_halvings = 40;
  int polish_steps = 3;
  Scalar step_tolerance = Scalar(1e-6);  // relative to 1 + max |coefficient|
};

template <typename Scalar>
struct GlmFit {
  VectorX<Scalar> coefficients;
  bool converged = false;
  int iterations = 0;
  VectorX<Scalar> score_residuals;
  Link link = Link::identity;
  std::vector<std::string> names;
  bool include_intercept = true;

  Scalar max_abs_score() const {
    return score_residuals.size() == 0 ? Scalar(0) : score_residuals.cwiseAbs().maxCoeff();
  }
};

namespace detail {

template <typename Scalar>
void check_lengths(const DesignSpec<Scalar>& design, const VectorX<Scalar>& response,
                   const VectorX<Scalar>& offset, const VectorX<Scalar>& weights) {
  const auto n = design.rows();
  if (response.size() != n)
    throw DimensionError("response has " + std::to_string(response.size()) + " entries, design has " +
                         std::to_string(n) + " rows");
  if (offset.size() != 0 && offset.size() != n)
    throw DimensionError("offset length " + std::to_string(offset.size()) + " != " + std::to_string(n));
  if (weights.size() != 0 && weights.size() != n)
    throw DimensionError("weights length " + std::to_string(weights.size()) + " != " + std::to_string(n));
}

template <typename Scalar>
VectorX<Scalar> resolve_weights(const VectorX<Scalar>& weights, Eigen::Index n) {
  if (weights.size() == 0) return VectorX<Scalar>::Ones(n);
  return weights;
}

template <typename Scalar>
VectorX<Scalar> resolve_offset(const VectorX<Scalar>& offset, Eigen::Index n) {
  if (offset.size() == 0) return VectorX<Scalar>::Zero(n);
  return offset;
}

template <typename Scalar>
std::vector<double> to_std(const VectorX<Scalar>& v) {
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(v(i));
  return out;
}

template <typename Scalar>
Scalar weighted_loglik(const VectorX<Scalar>& z, const VectorX<Scalar>& eta, const VectorX<Scalar>& w) {
  Scalar ll(0);
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (w(i) > Scalar(0)) ll += w(i) * (z(i) * eta(i) - log1pexp(eta(i)));
  return ll;
}

template <typename Scalar>
VectorX<Scalar> score(const MatrixX<Scalar>& x, const VectorX<Scalar>& z, const VectorX<Scalar>& mean,
                      const VectorX<Scalar>& w) {
  VectorX<Scalar> r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = w(i) > Scalar(0) ? w(i) * (z(i) - mean(i)) : Scalar(0);
  return x.transpose() * r;
}

template <typename Scalar>
void require_full_rank(const MatrixX<Scalar>& x, const VectorX<Scalar>& w) {
  MatrixX<Scalar> xw = w.cwiseSqrt().asDiagonal() * x;
  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(xw);
  if (qr.rank() < x.cols())
    throw SingularDesignError("design is rank deficient under the given weights (rank " +
                              std::to_string(qr.rank()) + " of " + std::to_string(x.cols()) + ")");
}

}  // namespace detail

template <typename Scalar>
VectorX<Scalar> linear_predictor(const VectorX<Scalar>& coefficients, const DesignSpec<Scalar>& design,
                                 const VectorX<Scalar>& offset = {}) {
  if (coefficients.size() != design.parameters())
    throw DimensionError("fit has " + std::to_string(coefficients.size()) + " coefficients, design has " +
                         std::to_string(design.parameters()) + " parameters");
  if (offset.size() != 0 && offset.size() != design.rows())
    throw DimensionError("offset length " + std::to_string(offset.size()) + " != " +
                         std::to_string(design.rows()));
  VectorX<Scalar> eta = design.model_matrix() * coefficients;
  if (offset.size() != 0) eta += offset;
  return eta;
}

// Response-scale predictions g^{-1}(offset + x'beta). An empty offset means zero.
template <typename Scalar>
VectorX<Scalar> predict(const GlmFit<Scalar>& fit, const DesignSpec<Scalar>& design,
                        const VectorX<Scalar>& offset = {}) {
  if (design.include_intercept != fit.include_intercept || design.names != fit.names)
    throw DimensionError("design columns do not match the columns the fit was trained on");
  VectorX<Scalar> eta = linear_predictor(fit.coefficients, design, offset);
  if (fit.link == Link::logit) eta = eta.unaryExpr([](Scalar e) { return expit(e); });
  return eta;
}

// Per-parameter sums sum_i w_i x_ij (z_i - zhat_i) at the given coefficients.
template <typename Scalar>
VectorX<Scalar> score_residuals(const VectorX<Scalar>& coefficients, const DesignSpec<Scalar>& design,
                                const VectorX<Scalar>& response, Link link, const VectorX<Scalar>& offset = {},
                                const VectorX<Scalar>& weights = {}) {
  detail::check_lengths(design, response, offset, weights);
  VectorX<Scalar> eta = linear_predictor(coefficients, design, offset);
  VectorX<Scalar> mean = eta.unaryExpr([link](Scalar e) { return inverse_link(link, e); });
  return detail::score(design.model_matrix(), response, mean, detail::resolve_weights(weights, design.rows()));
}

template <typename Scalar>
VectorX<Scalar> score_residuals(const GlmFit<Scalar>& fit, const DesignSpec<Scalar>& design,
                                const VectorX<Scalar>& response, Link link, const VectorX<Scalar>& offset = {},
                                const VectorX<Scalar>& weights = {}) {
  return score_residuals(fit.coefficients, design, response, link, offset, weights);
}

// Solves the (weighted, offset-adjusted) score equations. Empty offset/weights
// vectors mean "no offset" and "unit weights".
template <typename Scalar>
GlmFit<Scalar> fit_glm(const DesignSpec<Scalar>& design, const VectorX<Scalar>& response, Link link,
                       const VectorX<Scalar>& offset = {}, const VectorX<Scalar>& weights = {},
                       const GlmOptions<Scalar>& options = {}) {
  detail::check_lengths(design, response, offset, weights);
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.parameters();
  if (n < 1) throw InputError("fit_glm: no observations");
  if (p < 1) throw InputError("fit_glm: empty model (no intercept and no columns)");

  const VectorX<Scalar> w = detail::resolve_weights(weights, n);
  const VectorX<Scalar> b = detail::resolve_offset(offset, n);
  if (!w.allFinite() || (w.array() < Scalar(0)).any())
    throw InputError("fit_glm: weights must be finite and nonnegative");
  if (!(w.array() > Scalar(0)).any()) throw InputError("fit_glm: at least one weight must be positive");
  if (!response.allFinite() || !b.allFinite() || !design.columns.allFinite())
    throw InputError("fit_glm: non-finite input");
  if (link == Link::logit && ((response.array() < Scalar(0)).any() || (response.array() > Scalar(1)).any()))
    throw InputError("fit_glm: logit link requires responses in [0, 1]");

  const MatrixX<Scalar> x = design.model_matrix();
  detail::require_full_rank(x, w);

  const Scalar tol = options.score_tolerance * (Scalar(1) + w.sum());
  GlmFit<Scalar> fit;
  fit.link = link;
  fit.names = design.names;
  fit.include_intercept = design.include_intercept;

  if (link == Link::identity) {
    // Weighted least squares on z - b; a few refinement passes if the score is
    // still above tolerance (ill-conditioned designs).
    const VectorX<Scalar> sw = w.cwiseSqrt();
    const MatrixX<Scalar> xw = sw.asDiagonal() * x;
    Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(xw);
    VectorX<Scalar> beta = qr.solve(VectorX<Scalar>(sw.cwiseProduct(response - b)));
    VectorX<Scalar> s = detail::score(x, response, VectorX<Scalar>(x * beta + b), w);
    int it = 1;
    while (s.cwiseAbs().maxCoeff() > tol && it < options.max_iterations) {
      const VectorX<Scalar> resid = response - (x * beta + b);
      beta += qr.solve(VectorX<Scalar>(sw.cwiseProduct(resid)));
      s = detail::score(x, response, VectorX<Scalar>(x * beta + b), w);
      ++it;
    }
    fit.coefficients = beta;
    fit.score_residuals = s;
    fit.iterations = it;
    fit.converged = s.cwiseAbs().maxCoeff() <= tol;
    if (!fit.converged)
      throw NonConvergenceError("fit_glm: least-squares refinement did not reach the score tolerance",
                                detail::to_std(beta), detail::to_std(s), it);
    return fit;
  }

  auto means = [](const VectorX<Scalar>& eta) {
    return VectorX<Scalar>(eta.unaryExpr([](Scalar e) { return expit(e); }));
  };

  VectorX<Scalar> beta = VectorX<Scalar>::Zero(p);
  VectorX<Scalar> eta = x * beta + b;
  VectorX<Scalar> mu = means(eta);
  Scalar ll = detail::weighted_loglik(response, eta, w);
  VectorX<Scalar> s = detail::score(x, response, mu, w);

  auto newton_direction = [&](const VectorX<Scalar>& mu_now, const VectorX<Scalar>& s_now) {
    VectorX<Scalar> curvature(n);
    for (Eigen::Index i = 0; i < n; ++i) curvature(i) = w(i) * mu_now(i) * (Scalar(1) - mu_now(i));
    const MatrixX<Scalar> info = x.transpose() * curvature.asDiagonal() * x;
    Eigen::LDLT<MatrixX<Scalar>> ldlt(info);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > Scalar(0)).all())
      throw SeparationError("fit_glm: information matrix collapsed; fitted probabilities saturate at 0 or 1");
    VectorX<Scalar> step = ldlt.solve(s_now);
    if (!step.allFinite())
      throw SeparationError("fit_glm: Newton step is not finite; fitted probabilities saturate at 0 or 1");
    return step;
  };

  // Converged once the score is within tolerance and the next Newton step is
  // negligible. Under separation the score vanishes while the steps do not
  // shrink, so the coefficients run off until the information collapses.
  int it = 0;
  for (;;) {
    const bool score_ok = s.cwiseAbs().maxCoeff() <= tol;
    VectorX<Scalar> step;
    if (score_ok) {
      step = newton_direction(mu, s);
      if (step.cwiseAbs().maxCoeff() <= options.step_tolerance * (Scalar(1) + beta.cwiseAbs().maxCoeff())) break;
    }
    if (it >= options.max_iterations) {
      if (score_ok)
        throw SeparationError("fit_glm: coefficients keep growing while the score vanishes "
                              "(complete or quasi-complete separation)");
      throw NonConvergenceError("fit_glm: logistic fit did not converge in " +
                                    std::to_string(options.max_iterations) + " iterations",
                                detail::to_std(beta), detail::to_std(s), it);
    }
    ++it;
    if (!score_ok) step = newton_direction(mu, s);
    Scalar t(1);
    VectorX<Scalar> beta_new, eta_new;
    Scalar ll_new = -std::numeric_limits<Scalar>::infinity();
    const Scalar slack = Scalar(1e-12) * (Scalar(1) + std::abs(ll));
    for (int h = 0; h <= options.max_step_halvings; ++h) {
      beta_new = beta + t * step;
      eta_new = x * beta_new + b;
      ll_new = detail::weighted_loglik(response, eta_new, w);
      if (std::isfinite(ll_new) && ll_new >= ll - slack) break;
      t /= Scalar(2);
    }
    if (!(std::isfinite(ll_new) && ll_new >= ll - slack))
      throw NonConvergenceError("fit_glm: step-halving failed to increase the likelihood", detail::to_std(beta),
                                detail::to_std(s), it);
    beta = beta_new;
    eta = eta_new;
    ll = ll_new;
    mu = means(eta);
    s = detail::score(x, response, mu, w);
    if (beta.norm() > options.separation_norm)
      throw SeparationError("fit_glm: coefficient norm exceeded " +
                            std::to_string(static_cast<double>(options.separation_norm)) +
                            " (complete or quasi-complete separation)");
  }

  // Quadratic convergence means one or two more Newton steps push the score
  // to rounding level; keep them only while they help.
  for (int k = 0; k < options.polish_steps && s.cwiseAbs().maxCoeff() > Scalar(0); ++k) {
    VectorX<Scalar> step;
    try {
      step = newton_direction(mu, s);
    } catch (const SeparationError&) {
      break;
    }
    const VectorX<Scalar> beta_new = beta + step;
    const VectorX<Scalar> eta_new = x * beta_new + b;
    const VectorX<Scalar> mu_new = means(eta_new);
    const VectorX<Scalar> s_new = detail::score(x, response, mu_new, w);
    if (!(s_new.cwiseAbs().maxCoeff() < s.cwiseAbs().maxCoeff())) break;
    beta = beta_new;
    eta = eta_new;
    mu = mu_new;
    s = s_new;
  }

  fit.coefficients = beta;
  fit.score_residuals = s;
  fit.iterations = it;
  fit.converged = true;
  return fit;
}

}  // namespace tmle
