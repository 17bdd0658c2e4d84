#include <doctest.h>

#include "support.hpp"
#include "tmle/errors.hpp"
#include "tmle/longitudinal.hpp"

using namespace tmle;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

const Fluctuation kVariants[] = {Fluctuation::covariate_linear, Fluctuation::weighted_linear,
                                 Fluctuation::weighted_logistic};

LongLearners saturated() {
  LongLearners l;
  l.g0 = LearnerSpec::with_basis(1, 2, Link::logit);
  l.g1 = LearnerSpec::with_basis(1, 2, Link::logit);
  l.mu = LearnerSpec::with_basis(1, 2);
  l.emu = LearnerSpec::with_basis(1, 2);
  return l;
}

LongLearners for_variant(LongLearners l, Fluctuation f) {
  if (f == Fluctuation::weighted_logistic) l.emu.link = Link::logit;
  return l;
}

}  // namespace

TEST_CASE("eif_long row cases") {
  CHECK(eif_long_row(1, 0, 0.9, 0.4, 0.5, 0.3, 0.6, 0.5) == doctest::Approx(0.1));
  CHECK(eif_long_row(0, 1, 0.9, 0.4, 0.5, 0.6, 0.6, 0.5) == doctest::Approx(0.1));
  CHECK(eif_long_row(0, 0, 0.9, 0.4, 0.5, 0.3, 0.6, 0.5) ==
        doctest::Approx((0.9 - 0.3) / 0.2 + (0.3 - 0.6) / 0.4 + 0.6 - 0.5));
}

TEST_CASE("eif_long on a saturated discrete dataset matches per-row hand evaluation") {
  std::mt19937_64 rng(30);
  const auto d = support::random_discrete_long(rng, 120);
  LongOptions opt;
  opt.truncation = {1e-6, 1 - 1e-6};
  const auto r = tmle_long(d, saturated(), opt);
  const auto& nu = r.nuisances;
  const double theta = r.estimate.psi_hat;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    double phi = nu.emu_star(i) - theta;
    if (d.treatment0(i) == 0) phi += (nu.mu_star(i) - nu.emu_star(i)) / nu.g0(i);
    if (d.treatment0(i) == 0 && d.treatment1(i) == 0) phi += (d.outcome(i) - nu.mu_star(i)) / (nu.g0(i) * nu.g1(i));
    CHECK(std::abs(r.estimate.eif(i) - phi) < 1e-12);
  }
}

TEST_CASE("saturated learners reproduce the nested stratum g-formula") {
  std::mt19937_64 rng(31);
  LongOptions opt;
  opt.truncation = {1e-6, 1 - 1e-6};
  for (int rep = 0; rep < 10; ++rep) {
    const auto d = support::random_discrete_long(rng, 200);
    const double truth = oracle::stratum_long(d);
    const auto initial = fit_initial_long(d, saturated(), opt);
    for (auto f : kVariants) {
      CAPTURE(std::string(to_string(f)));
      const auto r = target_long(d, initial, for_variant(saturated(), f).emu, opt, f);
      CHECK(std::abs(r.estimate.psi_hat - truth) < 1e-10);
      CHECK(std::abs(r.nuisances.gamma0) < 1e-10);
      CHECK(std::abs(r.nuisances.gamma1) < 1e-10);
    }
    for (auto kind : {EstimatorKind::gcomp, EstimatorKind::one_step}) {
      CHECK(std::abs(estimate_long(d, initial, saturated(), opt, kind).psi_hat - truth) < 1e-10);
    }
  }
}

TEST_CASE("estimating-equation certificates") {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = support::random_long(rng, 60 + 10 * rep, rep % 2 == 0);
    for (auto f : kVariants) {
      CAPTURE(std::string(to_string(f)));
      const auto r = tmle_long(d, for_variant({}, f), {}, f);
      const auto& nu = r.nuisances;
      const VectorXd h1 = step3_weights(d, nu.g0, nu.g1);
      const VectorXd h0 = step5_weights(d, nu.g0);
      const double a1 = (h1.array() * (d.outcome - nu.mu_star).array()).sum();
      const double a2 = (h0.array() * (nu.mu_star - nu.emu_star).array()).sum();
      CHECK(std::abs(a1) <= 1e-8 * (1 + h1.sum()));
      CHECK(std::abs(a2) <= 1e-8 * (1 + h0.sum()));
      CHECK(std::abs(r.estimate.eif.mean()) <= 1e-8);
      CHECK(r.estimate.psi_hat == doctest::Approx(nu.emu_star.mean()).epsilon(1e-15));
      // Step 5 targets mu_star, not Y.
      CHECK(nu.step5_response == nu.mu_star);
      REQUIRE(r.estimate.diagnostics.targeting.size() == 2);
      CHECK(r.estimate.diagnostics.targeting[1].response == "mu_star");
      CHECK(r.estimate.diagnostics.trace.size() == 6);
      if (f == Fluctuation::weighted_linear) {
        for (Eigen::Index i = 0; i < d.size(); ++i)
          if (d.treatment0(i) == 0 && d.treatment1(i) == 0)
            CHECK(std::abs(nu.mu_star(i) - nu.mu_hat(i) - nu.gamma0) < 1e-12);
      }
      if (f == Fluctuation::weighted_logistic) {
        const auto b = d.outcome_bounds();
        CHECK(nu.mu_star.minCoeff() >= b.lo);
        CHECK(nu.mu_star.maxCoeff() <= b.hi);
        CHECK(nu.emu_star.minCoeff() >= b.lo);
        CHECK(nu.emu_star.maxCoeff() <= b.hi);
      }
    }
  }
}

TEST_CASE("cross-fitted nuisances keep the certificates") {
  std::mt19937_64 rng(33);
  const auto d = support::random_long(rng, 400, false);
  LongOptions opt;
  opt.folds = 3;
  opt.seed = 5;
  for (auto f : kVariants) {
    const auto r = tmle_long(d, for_variant({}, f), opt, f);
    CHECK(std::abs(r.estimate.eif.mean()) <= 1e-8);
    CHECK_FALSE(r.estimate.diagnostics.notes.empty());
  }
}

TEST_CASE("targeting coefficients match bisection oracles") {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> unif;
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = support::random_long(rng, 15 + rep, false);
    const auto n = d.size();
    InitialLongFits init;
    init.g0.resize(n);
    init.g1.resize(n);
    init.mu_hat.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      init.g0(i) = 0.2 + 0.7 * unif(rng);
      init.g1(i) = 0.2 + 0.7 * unif(rng);
      init.mu_hat(i) = 0.1 + 0.8 * unif(rng);
    }
    const VectorXd h1 = step3_weights(d, init.g0, init.g1);
    const VectorXd h0 = step5_weights(d, init.g0);
    for (auto f : kVariants) {
      CAPTURE(std::string(to_string(f)));
      const auto r = target_long(d, init, for_variant({}, f).emu, {}, f);
      const auto& nu = r.nuisances;
      // Root of each step's displayed score in its own fluctuation parameter.
      auto root = [&](const VectorXd& response, const VectorXd& initial, const VectorXd& h) {
        if (f == Fluctuation::weighted_logistic) {
          VectorXd off(n);
          for (Eigen::Index i = 0; i < n; ++i) off(i) = oracle::logit(std::clamp(initial(i), 1e-6, 1 - 1e-6));
          return oracle::logit_intercept(response, off, h);
        }
        const bool cov = f == Fluctuation::covariate_linear;
        return oracle::bisect(
            [&](double t) {
              double s = 0;
              for (Eigen::Index i = 0; i < n; ++i) s += h(i) * (response(i) - initial(i) - t * (cov ? h(i) : 1.0));
              return s;
            },
            -50, 50);
      };
      CHECK(std::abs(nu.gamma0 - root(d.outcome, init.mu_hat, h1)) < 1e-6);
      CHECK(std::abs(nu.gamma1 - root(nu.mu_star, nu.emu_hat, h0)) < 1e-6);
    }
  }
}

TEST_CASE("one-step identity for the sequential estimators") {
  std::mt19937_64 rng(35);
  for (int rep = 0; rep < 10; ++rep) {
    const auto d = support::random_long(rng, 150, rep % 2 == 1);
    const LongLearners l;
    const auto init = fit_initial_long(d, l, {});
    const auto g = gcomp_long(d, init, l.emu);
    const auto os = one_step_long(d, init, l.emu);
    // gcomp's EIF is the plug-in EIF evaluated at its own estimate.
    CHECK(std::abs(os.psi_hat - g.psi_hat - g.eif.mean()) < 1e-12);
    CHECK(std::abs(os.eif.mean()) < 1e-12);
  }
}

TEST_CASE("reduction to the point-treatment estimator") {
  std::mt19937_64 rng(36);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = support::random_point(rng, 50 + 15 * rep, rep % 2 == 0);
    LongDataset d;
    d.baseline = p.covariates;
    d.baseline_names = p.covariate_names;
    d.treatment0 = p.treatment;
    d.time1.resize(p.size(), 0);
    d.treatment1 = VectorXi::Zero(p.size());
    d.outcome = p.outcome;
    d.bounds = p.bounds;
    const auto point = tmle::tmle(p, estimate_nuisances(p, {}), Fluctuation::weighted_linear);
    const auto r = tmle_long(d, {}, {}, Fluctuation::weighted_linear);
    CHECK(std::abs(r.estimate.psi_hat - point.psi_hat) < 1e-10);
    CHECK((r.nuisances.g1.array() == 1.0).all());
  }
}

TEST_CASE("insufficient data") {
  std::mt19937_64 rng(37);
  auto d = support::random_long(rng, 40, false);
  d.treatment1.setOnes();
  CHECK_THROWS_AS(tmle_long(d, {}, {}), InsufficientDataError);
}
