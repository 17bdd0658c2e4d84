#include "tmle/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "tmle/errors.hpp"

namespace tmle {
namespace {

void check_binary(const Eigen::VectorXi& v, const std::string& what) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) != 0 && v(i) != 1)
      throw InputError(what + " must be coded 0/1 (row " + std::to_string(i) + " has " + std::to_string(v(i)) + ")");
}

void check_outcome(const Eigen::VectorXd& y, const std::optional<OutcomeBounds>& bounds) {
  if (!y.allFinite()) throw InputError("outcome contains non-finite values");
  if (!bounds) return;
  if (!(bounds->lo <= bounds->hi)) throw InputError("outcome bounds must satisfy lo <= hi");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) < bounds->lo || y(i) > bounds->hi)
      throw InputError("outcome at row " + std::to_string(i) + " lies outside the declared bounds");
}

bool is_binary(const Eigen::VectorXd& y) {
  return (y.array() == 0.0 || y.array() == 1.0).all();
}

Eigen::VectorXi to_binary(const std::vector<double>& col, const std::string& name) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(col.size()));
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (col[i] != 0.0 && col[i] != 1.0)
      throw InputError("treatment column '" + name + "' must be binary 0/1 (row " + std::to_string(i) + ")");
    out(static_cast<Eigen::Index>(i)) = static_cast<int>(col[i]);
  }
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& col) {
  return Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
}

Eigen::MatrixXd to_matrix(const csv::Table& table, const std::vector<std::string>& names) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = to_vector(table.column(names[j]));
  return m;
}

std::vector<std::string> with_prefix(const csv::Table& table, const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& h : table.header)
    if (h.rfind(prefix, 0) == 0) out.push_back(h);
  return out;
}

}  // namespace

void Dataset::validate() const {
  const auto n = outcome.size();
  if (n < 2) throw InputError("dataset needs at least 2 observations");
  if (treatment.size() != n || covariates.rows() != n)
    throw DimensionError("covariates, treatment and outcome must have equal length");
  if (static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols())
    throw DimensionError("covariate names do not match covariate columns");
  if (!covariates.allFinite()) throw InputError("covariates contain non-finite values");
  check_binary(treatment, "treatment");
  if (untreated_count() == 0) throw InputError("no untreated (A=0) observations");
  check_outcome(outcome, bounds);
}

OutcomeBounds Dataset::outcome_bounds() const {
  if (bounds) return *bounds;
  return {outcome.minCoeff(), outcome.maxCoeff()};
}

bool Dataset::binary_outcome() const { return is_binary(outcome); }

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.covariates.resize(m, covariates.cols());
  out.treatment.resize(m);
  out.outcome.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = rows[static_cast<std::size_t>(r)];
    out.covariates.row(r) = covariates.row(i);
    out.treatment(r) = treatment(i);
    out.outcome(r) = outcome(i);
  }
  out.covariate_names = covariate_names;
  out.bounds = bounds;
  return out;
}

void LongDataset::validate() const {
  const auto n = outcome.size();
  if (n < 2) throw InputError("longitudinal dataset needs at least 2 observations");
  if (baseline.rows() != n || time1.rows() != n || treatment0.size() != n || treatment1.size() != n)
    throw DimensionError("W0, A0, W1, A1 and Y must have equal length");
  if (static_cast<Eigen::Index>(baseline_names.size()) != baseline.cols() ||
      static_cast<Eigen::Index>(time1_names.size()) != time1.cols())
    throw DimensionError("covariate names do not match covariate columns");
  if (!baseline.allFinite() || !time1.allFinite()) throw InputError("covariates contain non-finite values");
  check_binary(treatment0, "A0");
  check_binary(treatment1, "A1");
  check_outcome(outcome, bounds);
  const auto both_untreated = (treatment0.array() == 0 && treatment1.array() == 0).count();
  if (both_untreated < 2) throw InsufficientDataError("fewer than 2 observations with A0 = A1 = 0");
}

OutcomeBounds LongDataset::outcome_bounds() const {
  if (bounds) return *bounds;
  return {outcome.minCoeff(), outcome.maxCoeff()};
}

bool LongDataset::binary_outcome() const { return is_binary(outcome); }

Eigen::MatrixXd LongDataset::history() const {
  Eigen::MatrixXd h(outcome.size(), baseline.cols() + time1.cols());
  h << baseline, time1;
  return h;
}

std::vector<std::string> LongDataset::history_names() const {
  auto names = baseline_names;
  names.insert(names.end(), time1_names.begin(), time1_names.end());
  return names;
}

Dataset dataset_from_table(const csv::Table& table, const PointColumns& columns,
                           std::optional<OutcomeBounds> bounds) {
  Dataset d;
  d.treatment = to_binary(table.column(columns.treatment), columns.treatment);
  d.outcome = to_vector(table.column(columns.outcome));
  d.covariate_names = columns.covariates;
  if (d.covariate_names.empty())
    for (const auto& h : table.header)
      if (h != columns.treatment && h != columns.outcome) d.covariate_names.push_back(h);
  d.covariates = to_matrix(table, d.covariate_names);
  d.bounds = bounds;
  d.validate();
  return d;
}

LongDataset long_dataset_from_table(const csv::Table& table, const LongColumns& columns,
                                    std::optional<OutcomeBounds> bounds) {
  LongDataset d;
  d.treatment0 = to_binary(table.column(columns.treatment0), columns.treatment0);
  d.treatment1 = to_binary(table.column(columns.treatment1), columns.treatment1);
  d.outcome = to_vector(table.column(columns.outcome));
  d.baseline_names = columns.baseline.empty() ? with_prefix(table, "W0") : columns.baseline;
  d.time1_names = columns.time1.empty() ? with_prefix(table, "W1") : columns.time1;
  d.baseline = to_matrix(table, d.baseline_names);
  d.time1 = to_matrix(table, d.time1_names);
  d.bounds = bounds;
  d.validate();
  return d;
}

csv::Table to_table(const Dataset& data, const std::string& treatment, const std::string& outcome) {
  csv::Table t;
  for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
    t.header.push_back(data.covariate_names[static_cast<std::size_t>(j)]);
    t.columns.emplace_back(data.covariates.col(j).data(), data.covariates.col(j).data() + data.size());
  }
  t.header.push_back(treatment);
  t.columns.emplace_back(data.treatment.data(), data.treatment.data() + data.size());
  t.header.push_back(outcome);
  t.columns.emplace_back(data.outcome.data(), data.outcome.data() + data.size());
  return t;
}

csv::Table to_table(const LongDataset& data) {
  csv::Table t;
  auto add_matrix = [&](const Eigen::MatrixXd& m, const std::vector<std::string>& names) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      t.header.push_back(names[static_cast<std::size_t>(j)]);
      t.columns.emplace_back(m.col(j).data(), m.col(j).data() + m.rows());
    }
  };
  const auto n = data.size();
  add_matrix(data.baseline, data.baseline_names);
  t.header.push_back("A0");
  t.columns.emplace_back(data.treatment0.data(), data.treatment0.data() + n);
  add_matrix(data.time1, data.time1_names);
  t.header.push_back("A1");
  t.columns.emplace_back(data.treatment1.data(), data.treatment1.data() + n);
  t.header.push_back("Y");
  t.columns.emplace_back(data.outcome.data(), data.outcome.data() + n);
  return t;
}

}  // namespace tmle
