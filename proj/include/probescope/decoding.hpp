// Copyright 2026 The probescope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROBESCOPE_DECODING_HPP_
#define PROBESCOPE_DECODING_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "probescope/features.hpp"
#include "probescope/roc.hpp"

namespace probescope {

// ---------------------------------------------------------------------------
// L2-penalized logistic regression
//
//   L(w, b) = -sum_i [ y_i log s(z_i) + (1 - y_i) log(1 - s(z_i)) ] + lambda |w|^2,
//   z_i = x_i . w + b,
//
// with the bias left out of the penalty. Minimized by damped Newton steps
// from w = 0, b = 0.
// ---------------------------------------------------------------------------

struct ProbeModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double lambda = 1.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;

  /// Predicted P(y = 1 | x) per row.
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& features) const;
};

struct LogisticFitOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 500;
};

double logistic_objective(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                          double lambda, const Eigen::VectorXd& weights, double bias);

/// Gradient of logistic_objective, packed as [dL/dw; dL/db].
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                                  double lambda, const Eigen::VectorXd& weights, double bias);

ProbeModel fit_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                        double lambda, const LogisticFitOptions& options = {});

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct CVSpec {
  int k = 5;
  std::uint64_t seed = 0;
  bool stratified = true;
  /// Keep both members of a minimal pair in the same fold.
  bool group_pairs = true;
};

using Folds = std::vector<std::vector<std::size_t>>;

/// Each class is shuffled and dealt round-robin, the second class continuing
/// where the first stopped, so fold sizes differ by at most one and every
/// fold's class counts are within one of the global proportion.
Folds stratified_folds(const Eigen::VectorXi& labels, const CVSpec& cv);

/// Same as stratified_folds, but the dealt units are pair ids; every member
/// of a pair lands in the pair's fold.
Folds grouped_stratified_folds(const Eigen::VectorXi& labels,
                               std::span<const std::int64_t> pair_ids, const CVSpec& cv);

struct DecodingResult {
  int layer = 0;
  Eigen::VectorXd fold_aucs;
  double mean_auc = 0.0;
  double sem = 0.0;  ///< sample sd of fold AUCs / sqrt(k)
  int nonconverged_folds = 0;
};

/// Mean and standard error of fold AUCs.
DecodingResult summarize_folds(int layer, Eigen::VectorXd fold_aucs);

/// k-fold probe: fit on k-1 folds, score the held-out fold by ROC-AUC of
/// predicted probabilities.
DecodingResult decode_layer(const FeatureTable& table, FeatureSubset subset, const CVSpec& cv,
                            double lambda = 1.0);

/// Folds used by decode_layer for this table and spec.
Folds folds_for(const FeatureTable& table, const CVSpec& cv);

}  // namespace probescope

#endif  // PROBESCOPE_DECODING_HPP_
