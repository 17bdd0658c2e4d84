#pragma once

// Two time-point TMLE of E(Y^{0,0}) by sequential regression with targeting:
//
//   1. propensities g0 = Pr(A0=0|W0), g1 = Pr(A1=0|W0,A0=0,W1)
//   2. mu_hat = E(Y|W0,A0=0,W1,A1=0)
//   3. fluctuate mu_hat toward Y with weights I(A0=A1=0)/(g0 g1)     -> mu_star
//   4. regress mu_star on W0 among A0=0                               -> emu_hat
//   5. fluctuate emu_hat toward mu_star with weights I(A0=0)/g0      -> emu_star
//   6. theta = mean(emu_star)

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tmle/dataset.hpp"
#include "tmle/estimators.hpp"
#include "tmle/nuisance.hpp"

namespace tmle {

struct LongLearners {
  LearnerSpec g0 = LearnerSpec::glm(Link::logit);
  LearnerSpec g1 = LearnerSpec::glm(Link::logit);
  LearnerSpec mu = LearnerSpec::glm();   // identity link unless set
  LearnerSpec emu = LearnerSpec::glm();  // identity (linear variants) / logit (logistic variant)
};

struct LongOptions {
  Truncation truncation;
  std::optional<OutcomeBounds> bounds;
  std::optional<int> folds;  // shared partition for all four nuisance fits; absent or 1 = none
  std::uint64_t seed = 0;
};

// Steps 1-2.
struct InitialLongFits {
  Eigen::VectorXd g0;
  Eigen::VectorXd g1;
  Eigen::VectorXd mu_hat;
  std::optional<std::vector<int>> fold_assignment;
  int truncation_hits = 0;
  bool g1_degenerate = false;  // no A0=0 row had A1=1, so g1 = 1
};

struct SequentialNuisances {
  Eigen::VectorXd g0;
  Eigen::VectorXd g1;
  Eigen::VectorXd mu_hat;
  Eigen::VectorXd mu_star;
  Eigen::VectorXd emu_hat;   // E(mu_star | W0, A0 = 0)
  Eigen::VectorXd emu_star;  // targeted version
  Eigen::VectorXd step5_response;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
};

struct LongResult {
  EstimateResult estimate;
  SequentialNuisances nuisances;
};

InitialLongFits fit_initial_long(const LongDataset& data, const LongLearners& learners, const LongOptions& options);

double eif_long_row(int a0, int a1, double y, double g0, double g1, double mu, double emu, double theta);

Eigen::VectorXd eif_long(const LongDataset& data, const Eigen::VectorXd& g0, const Eigen::VectorXd& g1,
                         const Eigen::VectorXd& mu, const Eigen::VectorXd& emu, double theta);

// At the targeted nuisances (mu_star, emu_star).
Eigen::VectorXd eif_long(const LongDataset& data, const SequentialNuisances& nuisances, double theta);

// Weights of the two targeting steps.
Eigen::VectorXd step3_weights(const LongDataset& data, const Eigen::VectorXd& g0, const Eigen::VectorXd& g1);
Eigen::VectorXd step5_weights(const LongDataset& data, const Eigen::VectorXd& g0);

LongResult tmle_long(const LongDataset& data, const LongLearners& learners, const LongOptions& options = {},
                     Fluctuation variant = Fluctuation::weighted_linear);

LongResult tmle_long_weighted_logistic(const LongDataset& data, const LongLearners& learners,
                                       const LongOptions& options = {});

// Steps 3-6 on precomputed steps 1-2.
LongResult target_long(const LongDataset& data, const InitialLongFits& initial, const LearnerSpec& emu_learner,
                       const LongOptions& options, Fluctuation variant);

// Sequential-regression plug-in and its one-step (AIPW) correction.
EstimateResult gcomp_long(const LongDataset& data, const InitialLongFits& initial, const LearnerSpec& emu_learner,
                          const LongOptions& options = {});
EstimateResult one_step_long(const LongDataset& data, const InitialLongFits& initial, const LearnerSpec& emu_learner,
                             const LongOptions& options = {});

EstimateResult estimate_long(const LongDataset& data, const InitialLongFits& initial, const LongLearners& learners,
                             const LongOptions& options, EstimatorKind kind);

}  // namespace tmle
