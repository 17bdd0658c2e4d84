#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmle/csv.hpp"

namespace tmle {

struct OutcomeBounds {
  double lo = 0.0;
  double hi = 1.0;
};

// Point-treatment observations O_i = (W_i, A_i, Y_i).
struct Dataset {
  Eigen::MatrixXd covariates;  // n x p
  std::vector<std::string> covariate_names;
  Eigen::VectorXi treatment;   // 0/1
  Eigen::VectorXd outcome;
  std::optional<OutcomeBounds> bounds;  // declared; inferred from the data when absent

  Eigen::Index size() const { return outcome.size(); }
  Eigen::Index untreated_count() const { return (treatment.array() == 0).count(); }

  // Throws InputError describing the first violated invariant.
  void validate() const;
  // Declared bounds, else (min Y, max Y).
  OutcomeBounds outcome_bounds() const;
  // True when every outcome is 0 or 1.
  bool binary_outcome() const;

  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

// Two time-point observations (W0, A0, W1, A1, Y) without loss to follow-up.
struct LongDataset {
  Eigen::MatrixXd baseline;  // W0, n x p0
  std::vector<std::string> baseline_names;
  Eigen::VectorXi treatment0;
  Eigen::MatrixXd time1;  // W1, n x p1 (p1 may be 0)
  std::vector<std::string> time1_names;
  Eigen::VectorXi treatment1;
  Eigen::VectorXd outcome;
  std::optional<OutcomeBounds> bounds;

  Eigen::Index size() const { return outcome.size(); }
  void validate() const;
  OutcomeBounds outcome_bounds() const;
  bool binary_outcome() const;

  // [W0 | W1] with names.
  Eigen::MatrixXd history() const;
  std::vector<std::string> history_names() const;
};

// Column-role mapping for reading datasets out of a CSV table.
struct PointColumns {
  std::vector<std::string> covariates;  // empty: every column other than treatment/outcome
  std::string treatment = "A";
  std::string outcome = "Y";
};

struct LongColumns {
  std::vector<std::string> baseline;  // empty: columns prefixed "W0"
  std::vector<std::string> time1;     // empty: columns prefixed "W1"
  std::string treatment0 = "A0";
  std::string treatment1 = "A1";
  std::string outcome = "Y";
};

Dataset dataset_from_table(const csv::Table& table, const PointColumns& columns,
                           std::optional<OutcomeBounds> bounds = std::nullopt);
LongDataset long_dataset_from_table(const csv::Table& table, const LongColumns& columns,
                                    std::optional<OutcomeBounds> bounds = std::nullopt);
csv::Table to_table(const Dataset& data, const std::string& treatment = "A", const std::string& outcome = "Y");
csv::Table to_table(const LongDataset& data);

}  // namespace tmle
