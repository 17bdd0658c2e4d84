#include "tmle/nuisance.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "tmle/errors.hpp"

namespace tmle {
namespace {

std::vector<std::size_t> select_columns(const LearnerSpec& spec, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  if (!spec.covariates) {
    idx.resize(names.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  for (const auto& want : *spec.covariates) {
    const auto it = std::find(names.begin(), names.end(), want);
    if (it == names.end()) throw InputError("learner references unknown covariate '" + want + "'");
    idx.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return idx;
}

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

Eigen::MatrixXd evaluate_terms(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& terms) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t t = 0; t < terms.size(); ++t) {
    Eigen::VectorXd col = Eigen::VectorXd::Ones(x.rows());
    for (std::size_t j = 0; j < terms[t].size(); ++j)
      for (int k = 0; k < terms[t][j]; ++k) col.array() *= x.col(static_cast<Eigen::Index>(j)).array();
    out.col(static_cast<Eigen::Index>(t)) = col;
  }
  return out;
}

std::string term_name(const std::vector<int>& powers, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t j = 0; j < powers.size(); ++j) {
    if (powers[j] == 0) continue;
    if (!out.empty()) out += "*";
    out += names[j];
    if (powers[j] > 1) out += "^" + std::to_string(powers[j]);
  }
  return out;
}

void clip_outcome(Eigen::VectorXd& v) {
  v = v.cwiseMax(kOutcomeClip).cwiseMin(1.0 - kOutcomeClip);
}

std::vector<Eigen::Index> rows_where(const Eigen::VectorXi& v, int value) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) == value) out.push_back(i);
  return out;
}

Eigen::VectorXd untreated_indicator(const Eigen::VectorXi& a) {
  return (a.array() == 0).cast<double>();
}

// Identity unless the learner asks for logit: a linear model reproduces strata
// means exactly, including strata whose outcomes are all 0 or all 1.
Link outcome_link(const LearnerSpec& learner) { return learner.link.value_or(Link::identity); }

}  // namespace

std::string LearnerSpec::describe() const {
  std::string out;
  switch (kind) {
    case LearnerKind::glm_main_terms:
      out = "glm_main_terms";
      break;
    case LearnerKind::glm_with_basis:
      out = "glm_with_basis(degree=" + std::to_string(basis.degree) +
            ",interaction_order=" + std::to_string(basis.interaction_order) + ")";
      break;
    case LearnerKind::knn:
      out = "knn(k=" + std::to_string(k) + ")";
      break;
  }
  if (link) out += std::string("[") + to_string(*link) + "]";
  if (covariates) {
    out += "{";
    for (std::size_t j = 0; j < covariates->size(); ++j) out += (j ? "," : "") + (*covariates)[j];
    out += "}";
  }
  return out;
}

void Truncation::validate() const {
  if (!(lo > 0.0 && lo < hi && hi < 1.0))
    throw InputError("truncation bounds must satisfy 0 < lo < hi < 1");
}

BasisExpansion expand_basis(const Eigen::MatrixXd& covariates, const std::vector<std::string>& names,
                            const BasisSpec& basis) {
  if (basis.degree < 1) throw InputError("basis degree must be >= 1");
  if (basis.interaction_order < 1) throw InputError("basis interaction order must be >= 1");
  const std::size_t p = names.size();
  std::vector<std::vector<int>> terms;
  // Enumerate power vectors in [0, degree]^p, grouped by how many covariates
  // they involve.
  std::vector<int> powers(p, 0);
  std::vector<std::vector<int>> all;
  while (true) {
    std::size_t j = 0;
    while (j < p && powers[j] == basis.degree) powers[j++] = 0;
    if (j == p) break;
    ++powers[j];
    const auto active = static_cast<int>(std::count_if(powers.begin(), powers.end(), [](int e) { return e > 0; }));
    if (active <= basis.interaction_order) all.push_back(powers);
  }
  // Order: fewer covariates first, then by the (covariate, power) sequence.
  auto key = [](const std::vector<int>& t) {
    std::vector<std::pair<std::size_t, int>> k;
    for (std::size_t j = 0; j < t.size(); ++j)
      if (t[j] > 0) k.emplace_back(j, t[j]);
    return k;
  };
  std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    const auto ka = key(a);
    const auto kb = key(b);
    if (ka.size() != kb.size()) return ka.size() < kb.size();
    return ka < kb;
  });
  BasisExpansion out;
  out.terms = std::move(all);
  for (const auto& t : out.terms) out.names.push_back(term_name(t, names));
  out.columns = evaluate_terms(covariates, out.terms);
  return out;
}

int truncate(Eigen::VectorXd& values, const Truncation& truncation) {
  int moved = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < truncation.lo) {
      values(i) = truncation.lo;
      ++moved;
    } else if (values(i) > truncation.hi) {
      values(i) = truncation.hi;
      ++moved;
    }
  }
  return moved;
}

NuisanceModel NuisanceModel::fit(const LearnerSpec& spec, const Eigen::MatrixXd& covariates,
                                 const std::vector<std::string>& names, const Eigen::VectorXd& response,
                                 Link default_link) {
  if (covariates.rows() != response.size()) throw DimensionError("learner: covariates and response differ in length");
  if (static_cast<Eigen::Index>(names.size()) != covariates.cols())
    throw DimensionError("learner: names do not match covariate columns");
  NuisanceModel model;
  model.description_ = spec.describe();
  const auto cols = select_columns(spec, names);
  const Eigen::MatrixXd x = take_columns(covariates, cols);
  std::vector<std::string> selected_names;
  for (auto c : cols) selected_names.push_back(names[c]);

  if (spec.kind == LearnerKind::knn) {
    const auto n = x.rows();
    if (spec.k < 1 || spec.k > n)
      throw InputError("knn: k = " + std::to_string(spec.k) + " must lie in [1, " + std::to_string(n) + "]");
    Knn knn;
    knn.columns = cols;
    knn.k = spec.k;
    knn.response = response;
    knn.center = x.colwise().mean();
    knn.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt((x.col(j).array() - knn.center(j)).square().mean());
      knn.scale(j) = sd > 0.0 ? sd : 1.0;
    }
    knn.train = (x.rowwise() - knn.center).array().rowwise() / knn.scale.array();
    model.link_ = Link::identity;
    model.state_ = std::move(knn);
    return model;
  }

  Glm glm;
  glm.columns = cols;
  const Link link = spec.link.value_or(default_link);
  BasisExpansion expansion;
  if (spec.kind == LearnerKind::glm_with_basis) {
    expansion = expand_basis(x, selected_names, spec.basis);
  } else {
    expansion = expand_basis(x, selected_names, BasisSpec{1, 1});
  }
  // Drop columns that are constant or duplicate an earlier column on the
  // training rows; they carry no information and would make the design singular.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < expansion.columns.cols(); ++j) {
    const auto col = expansion.columns.col(j);
    if (col.size() == 0 || (col.array() == col(0)).all()) continue;
    bool duplicate = false;
    for (auto k : keep)
      if (expansion.columns.col(k) == col) {
        duplicate = true;
        break;
      }
    if (!duplicate) keep.push_back(j);
  }
  Eigen::MatrixXd design_cols(x.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    design_cols.col(static_cast<Eigen::Index>(j)) = expansion.columns.col(keep[j]);
    glm.terms.push_back(expansion.terms[static_cast<std::size_t>(keep[j])]);
    glm.term_names.push_back(expansion.names[static_cast<std::size_t>(keep[j])]);
  }
  model.link_ = link;
  if (response.size() > 0 && (response.array() == response(0)).all()) {
    glm.constant = response(0);
    model.state_ = std::move(glm);
    return model;
  }
  const auto design = DesignSpec<double>::from_columns(glm.term_names, std::move(design_cols), true);
  glm.fit = fit_glm(design, response, link);
  model.link_ = link;
  model.state_ = std::move(glm);
  return model;
}

Eigen::VectorXd NuisanceModel::predict(const Eigen::MatrixXd& covariates) const {
  if (const auto* glm = std::get_if<Glm>(&state_)) {
    if (glm->constant) return Eigen::VectorXd::Constant(covariates.rows(), *glm->constant);
    const Eigen::MatrixXd x = take_columns(covariates, glm->columns);
    const auto design = DesignSpec<double>::from_columns(glm->term_names, evaluate_terms(x, glm->terms), true);
    Eigen::VectorXd out = tmle::predict(glm->fit, design);
    return out;
  }
  const auto& knn = std::get<Knn>(state_);
  const Eigen::MatrixXd x =
      ((take_columns(covariates, knn.columns).rowwise() - knn.center).array().rowwise() / knn.scale.array()).matrix();
  const auto m = knn.train.rows();
  Eigen::VectorXd out(x.rows());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  Eigen::VectorXd dist(m);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    dist = (knn.train.rowwise() - x.row(i)).rowwise().squaredNorm();
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + knn.k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return dist(a) < dist(b) || (dist(a) == dist(b) && a < b);
    });
    double sum = 0.0;
    for (int r = 0; r < knn.k; ++r) sum += knn.response(order[static_cast<std::size_t>(r)]);
    out(i) = sum / knn.k;
  }
  return out;
}

OutcomeFit fit_outcome(const Dataset& data, const LearnerSpec& learner) {
  const auto rows = rows_where(data.treatment, 0);
  if (rows.size() < 2)
    throw InsufficientDataError("outcome model needs at least 2 untreated observations, found " +
                                std::to_string(rows.size()));
  const Dataset train = data.subset(rows);
  const Link link = outcome_link(learner);
  OutcomeFit out{NuisanceModel::fit(learner, train.covariates, train.covariate_names, train.outcome, link), {}};
  out.predictions = out.model.predict(data.covariates);
  if (out.model.link() == Link::logit) clip_outcome(out.predictions);
  return out;
}

PropensityFit fit_propensity(const Dataset& data, const LearnerSpec& learner, const Truncation& truncation) {
  truncation.validate();
  const auto untreated = data.untreated_count();
  if (untreated == 0 || untreated == data.size())
    throw InputError("propensity model needs both treatment levels");
  const Eigen::VectorXd response = untreated_indicator(data.treatment);
  PropensityFit out{NuisanceModel::fit(learner, data.covariates, data.covariate_names, response, Link::logit), {}, {}, 0};
  out.raw = out.model.predict(data.covariates);
  out.predictions = out.raw;
  out.truncated = truncate(out.predictions, truncation);
  return out;
}

std::vector<int> make_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 2 || folds > n)
    throw InputError("fold count " + std::to_string(folds) + " must lie in [2, " + std::to_string(n) + "]");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < perm.size(); ++pos)
    assignment[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  return assignment;
}

NuisanceEstimates crossfit(const Dataset& data, const LearnerSpec& outcome_learner,
                           const LearnerSpec& propensity_learner, int folds, std::uint64_t seed,
                           const Truncation& truncation) {
  data.validate();
  truncation.validate();
  const auto n = data.size();
  const auto assignment = make_folds(n, folds, seed);

  NuisanceEstimates est;
  est.outcome_pred.resize(n);
  est.propensity_pred.resize(n);
  est.truncation = truncation;
  est.outcome_learner = outcome_learner.describe();
  est.propensity_learner = propensity_learner.describe();
  const Link y_link = outcome_link(outcome_learner);

  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (Eigen::Index i = 0; i < n; ++i) (assignment[static_cast<std::size_t>(i)] == f ? test_rows : train_rows).push_back(i);
    const Dataset train = data.subset(train_rows);
    const Dataset test = data.subset(test_rows);
    const auto untreated = train.untreated_count();
    if (untreated < 2)
      throw FoldDegeneracyError(static_cast<std::size_t>(f),
                                "training complement has " + std::to_string(untreated) + " untreated observations");
    if (untreated == train.size())
      throw FoldDegeneracyError(static_cast<std::size_t>(f), "training complement has no treated observations");

    // Outcome model: untreated training rows only.
    std::vector<Eigen::Index> untreated_rows;
    for (Eigen::Index i = 0; i < train.size(); ++i)
      if (train.treatment(i) == 0) untreated_rows.push_back(i);
    const Dataset train0 = train.subset(untreated_rows);
    const auto outcome_model =
        NuisanceModel::fit(outcome_learner, train0.covariates, train0.covariate_names, train0.outcome, y_link);
    Eigen::VectorXd q = outcome_model.predict(test.covariates);
    if (outcome_model.link() == Link::logit) clip_outcome(q);

    const auto prop_model = NuisanceModel::fit(propensity_learner, train.covariates, train.covariate_names,
                                               untreated_indicator(train.treatment), Link::logit);
    Eigen::VectorXd g = prop_model.predict(test.covariates);
    est.truncation_hits += truncate(g, truncation);

    for (std::size_t r = 0; r < test_rows.size(); ++r) {
      est.outcome_pred(test_rows[r]) = q(static_cast<Eigen::Index>(r));
      est.propensity_pred(test_rows[r]) = g(static_cast<Eigen::Index>(r));
    }
  }
  est.fold_assignment = assignment;
  return est;
}

int resolved_folds(const NuisanceConfig& config) {
  if (config.folds) return *config.folds;
  return config.outcome.parametric() && config.propensity.parametric() ? 1 : kDefaultFolds;
}

NuisanceEstimates estimate_nuisances(const Dataset& data, const NuisanceConfig& config) {
  const int folds = resolved_folds(config);
  if (folds > 1) return crossfit(data, config.outcome, config.propensity, folds, config.seed, config.truncation);
  if (folds < 1) throw InputError("fold count must be >= 1");
  data.validate();
  const auto outcome = fit_outcome(data, config.outcome);
  const auto propensity = fit_propensity(data, config.propensity, config.truncation);
  NuisanceEstimates est;
  est.outcome_pred = outcome.predictions;
  est.propensity_pred = propensity.predictions;
  est.truncation = config.truncation;
  est.truncation_hits = propensity.truncated;
  est.outcome_learner = config.outcome.describe();
  est.propensity_learner = config.propensity.describe();
  return est;
}

}  // namespace tmle
