#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"
#include "tmle/errors.hpp"
#include "tmle/estimators.hpp"

using namespace tmle;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

NuisanceEstimates given(VectorXd q, VectorXd g) {
  NuisanceEstimates n;
  n.outcome_pred = std::move(q);
  n.propensity_pred = std::move(g);
  return n;
}

// (W,A,Y) = (0,0,1),(0,1,0),(1,0,0),(1,1,1) with saturated nuisances.
Dataset four_rows() {
  Dataset d;
  d.covariates.resize(4, 1);
  d.covariates << 0, 0, 1, 1;
  d.covariate_names = {"W"};
  d.treatment.resize(4);
  d.treatment << 0, 1, 0, 1;
  d.outcome.resize(4);
  d.outcome << 1, 0, 0, 1;
  return d;
}

VectorXd four_q() {
  VectorXd q(4);
  q << 1, 1, 0, 0;
  return q;
}

double score(const Dataset& d, const VectorXd& g, const VectorXd& pred) {
  double s = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d.treatment(i) == 0) s += (d.outcome(i) - pred(i)) / g(i);
  return s;
}

double weight_sum(const Dataset& d, const VectorXd& g) {
  double s = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d.treatment(i) == 0) s += 1.0 / g(i);
  return s;
}

}  // namespace

TEST_CASE("saturated four-row example") {
  const auto d = four_rows();
  const auto nu = given(four_q(), VectorXd::Constant(4, 0.5));
  for (auto kind : all_estimators()) {
    CAPTURE(std::string(to_string(kind)));
    const auto r = estimate(d, nu, kind);
    CHECK(std::abs(r.psi_hat - 0.5) < 1e-12);
    CHECK(r.ci95.lo <= r.psi_hat);
    CHECK(r.psi_hat <= r.ci95.hi);
  }
  const auto eif = eif_values(d, four_q(), VectorXd::Constant(4, 0.5), 0.5);
  VectorXd expected(4);
  expected << 0.5, 0.5, -0.5, -0.5;
  CHECK((eif - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(eif.mean() == 0.0);
}

TEST_CASE("eif_values row cases") {
  auto d = four_rows();
  VectorXd q(4);
  q << 0.3, 0.7, 0.0, 0.2;
  const VectorXd g = VectorXd::Constant(4, 0.4);
  const auto eif = eif_values(d, q, g, 0.25);
  CHECK(eif(1) == doctest::Approx(0.7 - 0.25));  // treated
  CHECK(eif(3) == doctest::Approx(0.2 - 0.25));
  CHECK(eif(2) == doctest::Approx(0.0 - 0.25));  // untreated with Y = E
  CHECK(eif(0) == doctest::Approx((1 - 0.3) / 0.4 + 0.3 - 0.25));
}

TEST_CASE("gcomp") {
  const auto d = four_rows();
  const auto r = gcomp(d, given(VectorXd::Constant(4, 0.37), VectorXd::Constant(4, 0.5)));
  CHECK(r.psi_hat == doctest::Approx(0.37).epsilon(1e-15));
  CHECK_FALSE(r.diagnostics.notes.empty());

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif;
  VectorXd q(4);
  for (auto& v : q) v = unif(rng);
  double mean = 0;
  for (double v : q) mean += v;
  CHECK(std::abs(gcomp(d, given(q, VectorXd::Constant(4, 0.5))).psi_hat - mean / 4) < 1e-15);
}

TEST_CASE("wald inference") {
  VectorXd phi(2);
  phi << 1, -1;
  const auto inf = wald_inference(phi, 0.0);
  CHECK(inf.se == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(inf.ci95.lo == doctest::Approx(-kZ975));
  const auto flat = wald_inference(VectorXd::Constant(5, 0.3), 2.0);
  CHECK(flat.se == 0.0);
  CHECK(flat.ci95.lo == 2.0);
  CHECK(flat.ci95.hi == 2.0);
  CHECK_THROWS_AS(wald_inference(VectorXd::Zero(1), 0.0), InputError);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> norm;
  VectorXd v(37);
  for (auto& x : v) x = norm(rng);
  CHECK(std::abs(wald_inference(v, 0.0).se - std::sqrt(oracle::sample_variance(v) / 37)) < 1e-14);
}

TEST_CASE("one-step identity and zero-residual fluctuations") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = support::random_point(rng, 40, false);
    const auto nu = estimate_nuisances(d, {});
    const auto g = gcomp(d, nu);
    const auto os = one_step(d, nu);
    const auto plug = eif_values(d, nu.outcome_pred, nu.propensity_pred, g.psi_hat);
    CHECK(std::abs(os.psi_hat - g.psi_hat - plug.mean()) < 1e-12);
    CHECK(std::abs(os.eif.mean()) < 1e-12);
  }
  // Predictions equal to Y on the untreated rows leave nothing to target.
  auto d = four_rows();
  d.outcome << 0.2, 0.9, 0.6, 0.4;
  d.bounds = OutcomeBounds{0.0, 1.0};
  VectorXd q(4);
  q << 0.2, 0.5, 0.6, 0.4;
  VectorXd g(4);
  g << 0.3, 0.6, 0.45, 0.8;
  const auto nu = given(q, g);
  const double plug = q.mean();
  CHECK(std::abs(one_step(d, nu).psi_hat - plug) < 1e-15);
  for (auto f : {Fluctuation::covariate_linear, Fluctuation::weighted_linear, Fluctuation::weighted_logistic}) {
    CAPTURE(std::string(to_string(f)));
    const auto fl = fluctuate(d, nu, f);
    CHECK(std::abs(fl.coefficient) < 1e-12);
    CHECK(std::abs(tmle::tmle(d, nu, f).psi_hat - plug) < 1e-12);
  }
}

TEST_CASE("fluctuation coefficients match bisection oracles") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif;
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = support::random_point(rng, 12 + rep % 19, rep % 2 == 0);
    const auto n = d.size();
    VectorXd q(n), g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      q(i) = 0.05 + 0.9 * unif(rng);
      g(i) = 0.1 + 0.8 * unif(rng);
    }
    const auto nu = given(q, g);
    const auto h = clever_covariate(d.treatment, g);

    const double delta = oracle::bisect(
        [&](double t) {
          double s = 0;
          for (Eigen::Index i = 0; i < n; ++i) s += h(i) * (d.outcome(i) - q(i) - t * h(i));
          return s;
        },
        -50, 50);
    const auto cl = fluctuate(d, nu, Fluctuation::covariate_linear);
    CHECK(std::abs(cl.coefficient - delta) < 1e-6);
    double psi = 0;
    for (Eigen::Index i = 0; i < n; ++i) psi += q(i) + delta / g(i);
    CHECK(std::abs(cl.targeted_pred.mean() - psi / n) < 1e-6);

    const double gamma = oracle::bisect(
        [&](double t) {
          double s = 0;
          for (Eigen::Index i = 0; i < n; ++i) s += h(i) * (d.outcome(i) - q(i) - t);
          return s;
        },
        -50, 50);
    const auto wl = fluctuate(d, nu, Fluctuation::weighted_linear);
    CHECK(std::abs(wl.coefficient - gamma) < 1e-6);
    CHECK(std::abs(wl.targeted_pred.mean() - (q.mean() + gamma)) < 1e-6);

    const auto b = d.outcome_bounds();
    VectorXd z(n), off(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      z(i) = (d.outcome(i) - b.lo) / (b.hi - b.lo);
      off(i) = oracle::logit(std::clamp((q(i) - b.lo) / (b.hi - b.lo), 1e-6, 1 - 1e-6));
    }
    const double lg = oracle::logit_intercept(z, off, h);
    const auto wg = fluctuate(d, nu, Fluctuation::weighted_logistic);
    CHECK(std::abs(wg.coefficient - lg) < 1e-6);
    double psi_l = 0;
    for (Eigen::Index i = 0; i < n; ++i) psi_l += b.lo + (b.hi - b.lo) * oracle::expit(off(i) + lg);
    CHECK(std::abs(wg.targeted_pred.mean() - psi_l / n) < 1e-6);
  }
}

TEST_CASE("estimating-equation certificates") {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 40; ++rep) {
    const auto d = support::random_point(rng, 30 + 5 * rep, rep % 3 == 0);
    const auto nu = estimate_nuisances(d, {});
    const double hs = weight_sum(d, nu.propensity_pred);
    for (auto f : {Fluctuation::covariate_linear, Fluctuation::weighted_linear, Fluctuation::weighted_logistic}) {
      CAPTURE(std::string(to_string(f)));
      const auto fl = fluctuate(d, nu, f);
      const auto r = tmle::tmle(d, nu, f);
      CHECK(std::abs(score(d, nu.propensity_pred, fl.targeted_pred)) <= 1e-8 * (1 + hs));
      CHECK(std::abs(r.diagnostics.mean_eif) <= 1e-8);
      CHECK(std::abs(r.eif.mean()) <= 1e-8);
      CHECK(r.se > 0);
      CHECK(r.ci95.lo <= r.psi_hat);
      CHECK(r.psi_hat <= r.ci95.hi);
      REQUIRE(r.diagnostics.targeting.size() == 1);
      CHECK(r.diagnostics.targeting[0].coefficient == fl.coefficient);
    }
  }
}

TEST_CASE("weighted logistic respects the outcome bounds") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> unif;
  for (int rep = 0; rep < 50; ++rep) {
    auto d = support::random_point(rng, 20, false);
    const auto n = d.size();
    VectorXd q(n), g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      q(i) = unif(rng);
      g(i) = 0.01 + 0.2 * unif(rng);  // large weights push the linear variants around
    }
    const auto r = tmle::tmle(d, given(q, g), Fluctuation::weighted_logistic);
    CHECK(r.psi_hat >= 0.0);
    CHECK(r.psi_hat <= 1.0);
    CHECK(r.diagnostics.min_prediction >= 0.0);
    CHECK(r.diagnostics.max_prediction <= 1.0);
    REQUIRE(r.diagnostics.outcome_bounds.has_value());
  }
}

TEST_CASE("degenerate outcome bounds") {
  auto d = four_rows();
  d.outcome.setConstant(0.3);
  const auto nu = given(VectorXd::Constant(4, 0.3), VectorXd::Constant(4, 0.5));
  const auto r = tmle::tmle(d, nu, Fluctuation::weighted_logistic);
  CHECK(r.psi_hat == 0.3);
  CHECK(r.se == 0.0);
  const auto varying = given(VectorXd::Constant(4, 0.2), VectorXd::Constant(4, 0.5));
  CHECK_THROWS_AS(tmle::tmle(d, varying, Fluctuation::weighted_logistic), DegenerateOutcomeError);
}

TEST_CASE("input validation") {
  const auto d = four_rows();
  CHECK_THROWS_AS(gcomp(d, given(VectorXd::Zero(3), VectorXd::Constant(3, 0.5))), DimensionError);
  CHECK_THROWS_AS(one_step(d, given(four_q(), VectorXd::Constant(4, 1.0))), InputError);
  TmleOptions narrow;
  narrow.bounds = OutcomeBounds{0.0, 0.5};
  CHECK_THROWS_AS(tmle::tmle(d, given(four_q(), VectorXd::Constant(4, 0.5)), Fluctuation::weighted_logistic, narrow),
                  InputError);
  CHECK(parse_estimator("aipw") == EstimatorKind::one_step);
  CHECK_THROWS_AS(parse_estimator("nope"), InputError);
}

TEST_CASE("estimates are invariant to permuting observations") {
  std::mt19937_64 rng(16);
  for (int rep = 0; rep < 5; ++rep) {
    const auto d = support::random_point(rng, 60, rep % 2 == 0);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(d.size()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto p = d.subset(perm);
    const auto a = estimate_nuisances(d, {});
    const auto b = estimate_nuisances(p, {});
    for (auto kind : all_estimators()) {
      CAPTURE(std::string(to_string(kind)));
      CHECK(std::abs(estimate(d, a, kind).psi_hat - estimate(p, b, kind).psi_hat) < 1e-12);
    }
  }
}

TEST_CASE("affine equivariance of the linear estimators") {
  std::mt19937_64 rng(17);
  const double scale = 2.5, shift = -1.0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto d = support::random_point(rng, 80, false);
    auto t = d;
    t.outcome = (scale * d.outcome.array() + shift).matrix();
    t.bounds = OutcomeBounds{shift, scale + shift};
    const auto a = estimate_nuisances(d, {});
    const auto b = estimate_nuisances(t, {});
    for (auto kind : {EstimatorKind::gcomp, EstimatorKind::one_step, EstimatorKind::tmle_covariate_linear,
                      EstimatorKind::tmle_weighted_linear, EstimatorKind::tmle_weighted_logistic}) {
      CAPTURE(std::string(to_string(kind)));
      const auto ra = estimate(d, a, kind);
      const auto rb = estimate(t, b, kind);
      CHECK(std::abs(rb.psi_hat - (scale * ra.psi_hat + shift)) < 1e-10);
      CHECK(std::abs(rb.se - scale * ra.se) < 1e-10);
    }
  }
}

TEST_CASE("saturated learners reproduce the stratum plug-in") {
  std::mt19937_64 rng(18);
  for (int rep = 0; rep < 10; ++rep) {
    const auto d = support::random_discrete_point(rng, 2 + rep % 2, 150);
    NuisanceConfig cfg;
    cfg.outcome = LearnerSpec::with_basis(1, 3);
    cfg.propensity = LearnerSpec::with_basis(1, 3, Link::logit);
    cfg.truncation = {1e-6, 1 - 1e-6};
    const auto nu = estimate_nuisances(d, cfg);
    const double truth = oracle::stratum_point(d);
    for (auto kind : all_estimators()) {
      CAPTURE(std::string(to_string(kind)));
      CHECK(std::abs(estimate(d, nu, kind).psi_hat - truth) < 1e-10);
    }
  }
}
