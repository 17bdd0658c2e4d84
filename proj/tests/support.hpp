#pragma once

// Random datasets for property tests. Generated with std <random> directly so
// the estimator tests do not depend on the simulation module.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tmle/dataset.hpp"

namespace support {

inline std::string fixture(const std::string& name) { return std::string(TMLE_FIXTURES) + "/" + name; }

// Continuous and binary covariates, mild confounding. Y is binary or uniform
// noise around a bounded mean in [0, 1].
inline tmle::Dataset random_point(std::mt19937_64& rng, Eigen::Index n, bool binary_y) {
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif;
  tmle::Dataset d;
  for (;;) {
    d.covariates.resize(n, 2);
    d.covariate_names = {"W1", "W2"};
    d.treatment.resize(n);
    d.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w1 = norm(rng);
      const double w2 = unif(rng) < 0.5 ? 1.0 : 0.0;
      d.covariates(i, 0) = w1;
      d.covariates(i, 1) = w2;
      d.treatment(i) = unif(rng) < oracle::expit(-0.2 + 0.4 * w1 - 0.3 * w2) ? 1 : 0;
      const double mean = oracle::expit(-0.3 + 0.6 * w1 + 0.5 * w2 - 0.4 * d.treatment(i));
      d.outcome(i) = binary_y ? (unif(rng) < mean ? 1.0 : 0.0) : 0.6 * mean + 0.4 * unif(rng);
    }
    // Enough rows in each arm, and both arms in each W2 level, so the
    // main-terms GLMs are identifiable.
    int count[2][2] = {{0, 0}, {0, 0}};
    for (Eigen::Index i = 0; i < n; ++i) ++count[static_cast<int>(d.covariates(i, 1))][d.treatment(i)];
    if (count[0][0] >= 2 && count[0][1] >= 2 && count[1][0] >= 2 && count[1][1] >= 2) break;
  }
  if (!binary_y) d.bounds = tmle::OutcomeBounds{0.0, 1.0};
  return d;
}

// Binary covariates in which every covariate stratum holds both treatment levels,
// so saturated learners are well defined.
inline tmle::Dataset random_discrete_point(std::mt19937_64& rng, int covariates, Eigen::Index n) {
  std::uniform_real_distribution<double> unif;
  tmle::Dataset d;
  for (;;) {
    d.covariates.resize(n, covariates);
    d.covariate_names.clear();
    for (int j = 0; j < covariates; ++j) d.covariate_names.push_back("W" + std::to_string(j + 1));
    d.treatment.resize(n);
    d.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double lp = -0.2;
      for (int j = 0; j < covariates; ++j) {
        d.covariates(i, j) = unif(rng) < 0.5 ? 1.0 : 0.0;
        lp += 0.5 * (j % 2 ? -1 : 1) * d.covariates(i, j);
      }
      d.treatment(i) = unif(rng) < oracle::expit(lp) ? 1 : 0;
      d.outcome(i) = 0.1 + 0.8 * unif(rng) * (0.5 + 0.5 * d.covariates(i, 0));
    }
    std::set<std::vector<double>> seen[2];
    for (Eigen::Index i = 0; i < n; ++i) seen[d.treatment(i)].insert(oracle::row_key(d.covariates, i));
    if (seen[0] == seen[1] && seen[0].size() == (1u << covariates)) break;
  }
  d.bounds = tmle::OutcomeBounds{0.0, 1.0};
  return d;
}

// Two time points. W0: one continuous and one binary; W1: one binary; Y binary
// or continuous in [0, 1]. Redrawn until the regime cells hold the given
// minimum row counts.
inline tmle::LongDataset random_long(std::mt19937_64& rng, Eigen::Index n, bool binary_y, int min00 = 6,
                                     int min01 = 4, int min_treated0 = 4) {
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif;
  tmle::LongDataset d;
  for (;;) {
    d.baseline.resize(n, 2);
    d.baseline_names = {"W0a", "W0b"};
    d.time1.resize(n, 1);
    d.time1_names = {"W1"};
    d.treatment0.resize(n);
    d.treatment1.resize(n);
    d.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = norm(rng), b = unif(rng) < 0.5 ? 1.0 : 0.0;
      d.baseline(i, 0) = a;
      d.baseline(i, 1) = b;
      d.treatment0(i) = unif(rng) < oracle::expit(-0.5 + 0.4 * a) ? 1 : 0;
      d.time1(i, 0) = unif(rng) < oracle::expit(0.3 * a + 0.5 * b - 0.5 * d.treatment0(i)) ? 1.0 : 0.0;
      d.treatment1(i) = unif(rng) < oracle::expit(-0.5 + 0.3 * a + 0.4 * d.time1(i, 0)) ? 1 : 0;
      const double mean = oracle::expit(-0.2 + 0.5 * a + 0.4 * b + 0.6 * d.time1(i, 0) -
                                        0.3 * (d.treatment0(i) + d.treatment1(i)));
      d.outcome(i) = binary_y ? (unif(rng) < mean ? 1.0 : 0.0) : 0.6 * mean + 0.4 * unif(rng);
    }
    int a00 = 0, a0 = 0, a01 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d.treatment0(i) == 0) {
        ++a0;
        (d.treatment1(i) == 0 ? a00 : a01)++;
      }
    }
    if (a00 >= min00 && a01 >= min01 && n - a0 >= min_treated0) break;
  }
  if (!binary_y) d.bounds = tmle::OutcomeBounds{0.0, 1.0};
  return d;
}

// Binary W0 and W1 with every (W0, W1) stratum holding A0 = 0 rows with both
// A1 levels and every W0 stratum holding both A0 levels.
inline tmle::LongDataset random_discrete_long(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> unif;
  tmle::LongDataset d;
  for (;;) {
    d.baseline.resize(n, 1);
    d.baseline_names = {"W0"};
    d.time1.resize(n, 1);
    d.time1_names = {"W1"};
    d.treatment0.resize(n);
    d.treatment1.resize(n);
    d.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w0 = unif(rng) < 0.5 ? 1.0 : 0.0;
      d.baseline(i, 0) = w0;
      d.treatment0(i) = unif(rng) < oracle::expit(-0.3 + 0.5 * w0) ? 1 : 0;
      d.time1(i, 0) = unif(rng) < oracle::expit(0.2 + 0.6 * w0 - 0.5 * d.treatment0(i)) ? 1.0 : 0.0;
      d.treatment1(i) = unif(rng) < oracle::expit(-0.2 + 0.4 * d.time1(i, 0)) ? 1 : 0;
      d.outcome(i) = 0.1 + 0.8 * unif(rng) * (0.4 + 0.3 * w0 + 0.3 * d.time1(i, 0));
    }
    std::set<std::vector<double>> a0_levels[2], a1_levels[2];
    for (Eigen::Index i = 0; i < n; ++i) {
      a0_levels[d.treatment0(i)].insert({d.baseline(i, 0)});
      if (d.treatment0(i) == 0) a1_levels[d.treatment1(i)].insert({d.baseline(i, 0), d.time1(i, 0)});
    }
    if (a0_levels[0].size() == 2 && a0_levels[1].size() == 2 && a1_levels[0].size() == 4 && a1_levels[1].size() == 4)
      break;
  }
  d.bounds = tmle::OutcomeBounds{0.0, 1.0};
  return d;
}

}  // namespace support
