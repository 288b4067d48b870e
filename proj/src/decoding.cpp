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

#include "probescope/decoding.hpp"

#include <cmath>
#include <map>

#include "probescope/error.hpp"
#include "probescope/random.hpp"

namespace probescope {

namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXi& y) {
  if (x.rows() != y.size()) throw ConfigError("logistic: features and labels differ in length");
  if (x.rows() < 2) throw DegenerateError("logistic: need at least 2 samples");
  if (!x.allFinite()) throw DegenerateError("logistic: non-finite feature values");
  const auto pos = (y.array() != 0).count();
  if (pos == 0 || pos == y.size()) throw DegenerateError("logistic: labels contain a single class");
}

}  // namespace

Eigen::VectorXd ProbeModel::predict_proba(const Eigen::MatrixXd& features) const {
  const Eigen::VectorXd z = (features * weights).array() + bias;
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

double logistic_objective(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, double lambda,
                          const Eigen::VectorXd& w, double b) {
  const Eigen::VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) loss += y(i) != 0 ? softplus(-z(i)) : softplus(z(i));
  return loss + lambda * w.squaredNorm();
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                                  double lambda, const Eigen::VectorXd& w, double b) {
  const Eigen::VectorXd z = (x * w).array() + b;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - (y(i) != 0 ? 1.0 : 0.0);
  Eigen::VectorXd g(w.size() + 1);
  g.head(w.size()) = x.transpose() * r + 2.0 * lambda * w;
  g(w.size()) = r.sum();
  return g;
}

ProbeModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, double lambda,
                        const LogisticFitOptions& options) {
  check_inputs(x, y);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError("logistic: lambda must be finite and >= 0");
  const Eigen::Index p = x.cols();
  const Eigen::Index n = x.rows();

  // Augmented design [x, 1] so (w, b) is one parameter vector.
  Eigen::MatrixXd xa(n, p + 1);
  xa.leftCols(p) = x;
  xa.col(p).setOnes();
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, 2.0 * lambda);
  penalty(p) = 0.0;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  ProbeModel model;
  model.lambda = lambda;
  auto objective = [&](const Eigen::VectorXd& t) {
    return logistic_objective(x, y, lambda, t.head(p), t(p));
  };
  double f = objective(theta);

  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd g = logistic_gradient(x, y, lambda, theta.head(p), theta(p));
    model.gradient_norm = g.norm();
    model.iterations = it;
    if (model.gradient_norm <= options.gradient_tolerance) {
      model.converged = true;
      break;
    }
    const Eigen::VectorXd z = xa * theta;
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = sigmoid(z(i));
      s(i) = q * (1.0 - q);
    }
    Eigen::MatrixXd h = xa.transpose() * s.asDiagonal() * xa;
    h.diagonal() += penalty;
    // Keeps the system solvable once probabilities saturate.
    h.diagonal().array() += 1e-12 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
    Eigen::VectorXd step = h.ldlt().solve(g);
    if (!step.allFinite() || g.dot(step) <= 0.0) step = g;

    double t = 1.0;
    Eigen::VectorXd candidate = theta - step;
    double f_new = objective(candidate);
    const double slope = g.dot(step);
    while (!(f_new <= f - 1e-4 * t * slope) && t > 1e-12) {
      t *= 0.5;
      candidate = theta - t * step;
      f_new = objective(candidate);
    }
    if (!(f_new <= f)) {
      // No representable descent left.
      model.iterations = it + 1;
      break;
    }
    theta = candidate;
    f = f_new;
    model.iterations = it + 1;
  }
  if (!model.converged) {
    const Eigen::VectorXd g = logistic_gradient(x, y, lambda, theta.head(p), theta(p));
    model.gradient_norm = g.norm();
    model.converged = model.gradient_norm <= options.gradient_tolerance;
  }
  model.weights = theta.head(p);
  model.bias = theta(p);
  return model;
}

namespace {

void check_cv(const CVSpec& cv) {
  if (cv.k < 2) throw ConfigError("cross-validation: k must be >= 2");
}

/// Deals shuffled units of each stratum round-robin into k folds. Strata are
/// visited in key order and the dealing position carries over between them.
template <typename Key>
std::vector<int> deal(const std::map<Key, std::vector<std::size_t>>& strata, int k,
                      std::uint64_t seed, std::size_t unit_count) {
  std::vector<int> fold_of(unit_count, -1);
  Rng rng(seed);
  std::size_t position = 0;
  for (const auto& [key, members] : strata) {
    std::vector<std::size_t> units = members;
    rng.shuffle(units);
    for (auto u : units) fold_of[u] = static_cast<int>(position++ % static_cast<std::size_t>(k));
  }
  return fold_of;
}

}  // namespace

Folds stratified_folds(const Eigen::VectorXi& labels, const CVSpec& cv) {
  check_cv(cv);
  const auto n = static_cast<std::size_t>(labels.size());
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    const int key = cv.stratified ? (labels(i) != 0 ? 1 : 0) : 0;
    strata[key].push_back(i);
  }
  if (cv.stratified) {
    for (int c : {0, 1}) {
      if (strata[c].size() < static_cast<std::size_t>(cv.k))
        throw DegenerateError("cross-validation: class " + std::to_string(c) + " has " +
                              std::to_string(strata[c].size()) + " members, fewer than k=" +
                              std::to_string(cv.k));
    }
  } else if (n < static_cast<std::size_t>(cv.k)) {
    throw DegenerateError("cross-validation: fewer samples than folds");
  }
  const auto fold_of = deal(strata, cv.k, cv.seed, n);
  Folds folds(static_cast<std::size_t>(cv.k));
  for (std::size_t i = 0; i < n; ++i) folds[fold_of[i]].push_back(i);
  return folds;
}

Folds grouped_stratified_folds(const Eigen::VectorXi& labels,
                               std::span<const std::int64_t> pair_ids, const CVSpec& cv) {
  check_cv(cv);
  if (pair_ids.size() != static_cast<std::size_t>(labels.size()))
    throw ConfigError("cross-validation: pair ids and labels differ in length");
  std::map<std::int64_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < pair_ids.size(); ++i) members[pair_ids[i]].push_back(i);

  std::vector<std::vector<std::size_t>> units;
  units.reserve(members.size());
  for (auto& [id, rows] : members) units.push_back(rows);

  // Stratum = (positives, negatives) composition of the unit.
  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t u = 0; u < units.size(); ++u) {
    int pos = 0;
    for (auto r : units[u]) pos += labels(r) != 0;
    const int neg = static_cast<int>(units[u].size()) - pos;
    strata[cv.stratified ? std::make_pair(pos, neg) : std::make_pair(0, 0)].push_back(u);
  }
  const auto fold_of = deal(strata, cv.k, cv.seed, units.size());
  Folds folds(static_cast<std::size_t>(cv.k));
  for (std::size_t u = 0; u < units.size(); ++u)
    for (auto r : units[u]) folds[fold_of[u]].push_back(r);
  for (auto& f : folds) std::sort(f.begin(), f.end());

  for (std::size_t f = 0; f < folds.size(); ++f) {
    int pos = 0;
    for (auto r : folds[f]) pos += labels(r) != 0;
    if (pos == 0 || pos == static_cast<int>(folds[f].size()))
      throw DegenerateError("cross-validation: fold " + std::to_string(f) +
                            " lacks one of the classes (too few pairs for k=" +
                            std::to_string(cv.k) + ")");
  }
  return folds;
}

DecodingResult summarize_folds(int layer, Eigen::VectorXd fold_aucs) {
  DecodingResult r;
  r.layer = layer;
  const auto k = static_cast<double>(fold_aucs.size());
  r.mean_auc = fold_aucs.mean();
  const double ss = (fold_aucs.array() - r.mean_auc).square().sum();
  r.sem = fold_aucs.size() > 1 ? std::sqrt(ss / (k - 1.0)) / std::sqrt(k) : 0.0;
  r.fold_aucs = std::move(fold_aucs);
  return r;
}

Folds folds_for(const FeatureTable& table, const CVSpec& cv) {
  return cv.group_pairs ? grouped_stratified_folds(table.labels, table.pair_ids, cv)
                        : stratified_folds(table.labels, cv);
}

DecodingResult decode_layer(const FeatureTable& table, FeatureSubset subset, const CVSpec& cv,
                            double lambda) {
  const Eigen::MatrixXd x = table.select(subset);
  if (!x.allFinite())
    throw DegenerateError("decode layer " + std::to_string(table.layer) +
                          ": non-finite features in subset " + subset.label());
  const Folds folds = folds_for(table, cv);
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<int> fold_of(n);
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (auto r : folds[f]) fold_of[r] = static_cast<int>(f);

  Eigen::VectorXd aucs(cv.k);
  int nonconverged = 0;
  for (int f = 0; f < cv.k; ++f) {
    const auto& test = folds[static_cast<std::size_t>(f)];
    const auto n_test = static_cast<Eigen::Index>(test.size());
    const auto n_train = static_cast<Eigen::Index>(n) - n_test;
    Eigen::MatrixXd x_train(n_train, x.cols());
    Eigen::VectorXi y_train(n_train);
    Eigen::MatrixXd x_test(n_test, x.cols());
    Eigen::VectorXi y_test(n_test);
    Eigen::Index a = 0;
    Eigen::Index b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      if (fold_of[i] == f) {
        x_test.row(b) = x.row(row);
        y_test(b++) = table.labels(row);
      } else {
        x_train.row(a) = x.row(row);
        y_train(a++) = table.labels(row);
      }
    }
    const ProbeModel model = fit_logistic(x_train, y_train, lambda);
    if (!model.converged) ++nonconverged;
    aucs(f) = roc_auc(model.predict_proba(x_test), y_test);
  }
  DecodingResult result = summarize_folds(table.layer, std::move(aucs));
  result.nonconverged_folds = nonconverged;
  return result;
}

}  // namespace probescope
