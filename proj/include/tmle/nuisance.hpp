#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tmle/dataset.hpp"
#include "tmle/glm.hpp"

namespace tmle {

enum class LearnerKind { glm_main_terms, glm_with_basis, knn };

// Per-covariate powers 1..degree, multiplied across at most interaction_order
// distinct covariates. degree = 1, interaction_order = 2 gives main terms plus
// pairwise products; interaction_order = p gives the full tensor product.
struct BasisSpec {
  int degree = 1;
  int interaction_order = 1;
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::glm_main_terms;
  BasisSpec basis;
  int k = 0;                           // knn only
  std::optional<Link> link;            // GLM link; role default when absent
  std::optional<std::vector<std::string>> covariates;  // subset to use; absent = all

  static LearnerSpec glm(std::optional<Link> link = std::nullopt) { return {LearnerKind::glm_main_terms, {}, 0, link, {}}; }
  static LearnerSpec with_basis(int degree, int interaction_order, std::optional<Link> link = std::nullopt) {
    return {LearnerKind::glm_with_basis, {degree, interaction_order}, 0, link, {}};
  }
  static LearnerSpec knn(int k) { return {LearnerKind::knn, {}, k, std::nullopt, {}}; }

  bool parametric() const { return kind != LearnerKind::knn; }
  std::string describe() const;
};

// Clipping interval for estimated propensities.
struct Truncation {
  double lo = 0.01;
  double hi = 0.99;
  void validate() const;
};

// Outcome predictions from a logit-link learner are kept inside this margin of
// {0, 1} so that downstream logit transforms stay finite.
inline constexpr double kOutcomeClip = 1e-6;

// A trained learner that can be evaluated on new covariate rows.
class NuisanceModel {
 public:
  struct Glm {
    std::vector<std::size_t> columns;               // selected covariate indices
    std::vector<std::vector<int>> terms;            // powers per selected covariate
    std::vector<std::string> term_names;
    GlmFit<double> fit;
    // Set when the training response is constant: the maximum-likelihood fit
    // (in the closure of the model for logit at 0 or 1) predicts that constant.
    std::optional<double> constant;
  };
  struct Knn {
    std::vector<std::size_t> columns;
    Eigen::MatrixXd train;  // standardized
    Eigen::VectorXd response;
    Eigen::RowVectorXd center;
    Eigen::RowVectorXd scale;
    int k = 1;
  };

  // Fit the learner on (covariates, response). Names identify the covariate
  // columns; the same layout must be passed to predict().
  static NuisanceModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& covariates,
                           const std::vector<std::string>& names, const Eigen::VectorXd& response,
                           Link default_link);

  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const;
  Link link() const { return link_; }
  const std::string& description() const { return description_; }
  const std::variant<Glm, Knn>& state() const { return state_; }

 private:
  std::variant<Glm, Knn> state_;
  Link link_ = Link::identity;
  std::string description_;
};

struct OutcomeFit {
  NuisanceModel model;
  Eigen::VectorXd predictions;  // E(Y | A = 0, W_i) for every i
};

struct PropensityFit {
  NuisanceModel model;
  Eigen::VectorXd raw;          // Pr(A = 0 | W_i) before truncation
  Eigen::VectorXd predictions;  // clipped into [lo, hi]
  int truncated = 0;
};

struct NuisanceEstimates {
  Eigen::VectorXd outcome_pred;
  Eigen::VectorXd propensity_pred;
  std::optional<std::vector<int>> fold_assignment;
  Truncation truncation;
  int truncation_hits = 0;
  std::string outcome_learner;
  std::string propensity_learner;
};

// Basis expansion used by glm_with_basis, exposed for tests and diagnostics.
struct BasisExpansion {
  Eigen::MatrixXd columns;
  std::vector<std::vector<int>> terms;
  std::vector<std::string> names;
};
BasisExpansion expand_basis(const Eigen::MatrixXd& covariates, const std::vector<std::string>& names,
                            const BasisSpec& basis);

// Clip into [lo, hi]; returns the number of entries that moved.
int truncate(Eigen::VectorXd& values, const Truncation& truncation);

// Outcome regression on the A = 0 subset, predicted for every row.
OutcomeFit fit_outcome(const Dataset& data, const LearnerSpec& learner);

// Model for Pr(A = 0 | W), predicted for every row and truncated.
PropensityFit fit_propensity(const Dataset& data, const LearnerSpec& learner, const Truncation& truncation = {});

// Seeded partition of 0..n-1 into K near-equal folds.
std::vector<int> make_folds(Eigen::Index n, int folds, std::uint64_t seed);

NuisanceEstimates crossfit(const Dataset& data, const LearnerSpec& outcome_learner,
                           const LearnerSpec& propensity_learner, int folds, std::uint64_t seed,
                           const Truncation& truncation = {});

struct NuisanceConfig {
  LearnerSpec outcome = LearnerSpec::glm();
  LearnerSpec propensity = LearnerSpec::glm(Link::logit);
  Truncation truncation;
  // Fold count; absent means the default policy: no cross-fitting for
  // parametric learners, 5 folds when either learner is kNN. 1 disables it.
  std::optional<int> folds;
  std::uint64_t seed = 0;
};

inline constexpr int kDefaultFolds = 5;

// Resolved fold count under NuisanceConfig's policy (1 = full-sample fits).
int resolved_folds(const NuisanceConfig& config);

NuisanceEstimates estimate_nuisances(const Dataset& data, const NuisanceConfig& config);

}  // namespace tmle
