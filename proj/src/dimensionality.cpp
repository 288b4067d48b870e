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

#include "probescope/dimensionality.hpp"

#include <sstream>

#include <Eigen/Eigenvalues>

#include "probescope/csv.hpp"
#include "probescope/parallel.hpp"

namespace probescope {

Eigen::VectorXd floor_spectrum(const Eigen::VectorXd& eigenvalues, double floor) {
  Eigen::VectorXd v = eigenvalues.cwiseMax(0.0);
  if (v.size() == 0) return v;
  const double cut = floor * v.maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) < cut) v(i) = 0.0;
  return v;
}

Eigen::VectorXd centered_spectrum(const Eigen::MatrixXd& x, SpectrumRoute route) {
  if (x.rows() < 2) throw DegenerateError("spectrum: need at least 2 samples");
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  if (route == SpectrumRoute::Auto)
    route = x.cols() > x.rows() ? SpectrumRoute::Gram : SpectrumRoute::Covariance;
  const Eigen::MatrixXd scatter = route == SpectrumRoute::Gram
                                      ? Eigen::MatrixXd(xc * xc.transpose())
                                      : Eigen::MatrixXd(xc.transpose() * xc);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw DegenerateError("spectrum: eigensolver failed");
  return floor_spectrum(solver.eigenvalues());
}

double matrix_pr(const Eigen::MatrixXd& x, SpectrumRoute route) {
  return participation_ratio(centered_spectrum(x, route));
}

std::string to_string(Centering c) {
  return c == Centering::PerCondition ? "per_condition" : "global";
}

Centering parse_centering(std::string_view text) {
  if (text == "per_condition") return Centering::PerCondition;
  if (text == "global") return Centering::Global;
  throw ConfigError("unknown centering '" + std::string(text) + "'");
}

namespace {

struct LayerPR {
  double pr;
  int n_effective;
};

LayerPR compute_layer_pr(const ActivationRun& run, int layer, Condition condition,
                         const PROptions& options) {
  const auto rows = condition_rows(run, condition);
  if (rows.size() < 2)
    throw DegenerateError("participation ratio: condition " + std::string(to_string(condition)) +
                          " has fewer than 2 sentences");
  Eigen::MatrixXd x = layer_matrix(run, layer, options.pooling, options.token_policy, rows);
  if (options.centering == Centering::Global) {
    // Center on the pooled mean; the spectrum then comes from the raw scatter.
    const Eigen::MatrixXd all = layer_matrix(run, layer, options.pooling, options.token_policy);
    if (all.cols() != x.cols())
      throw DegenerateError("participation ratio: global centering needs a common feature width");
    x.rowwise() -= all.colwise().mean();
    auto route = options.route;
    if (route == SpectrumRoute::Auto)
      route = x.cols() > x.rows() ? SpectrumRoute::Gram : SpectrumRoute::Covariance;
    const Eigen::MatrixXd scatter = route == SpectrumRoute::Gram
                                        ? Eigen::MatrixXd(x * x.transpose())
                                        : Eigen::MatrixXd(x.transpose() * x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter, Eigen::EigenvaluesOnly);
    return {participation_ratio(floor_spectrum(solver.eigenvalues())),
            static_cast<int>(std::min<Eigen::Index>(x.rows(), x.cols()))};
  }
  return {matrix_pr(x, options.route),
          static_cast<int>(std::min<Eigen::Index>(x.rows() - 1, x.cols()))};
}

}  // namespace

double layer_pr(const ActivationRun& run, int layer, Condition condition,
                const PROptions& options) {
  return compute_layer_pr(run, layer, condition, options).pr;
}

PRTrace pr_difference_trace(const ActivationRun& run, const PROptions& options, unsigned jobs) {
  const int layers = run.num_layers;
  PRTrace trace;
  for (auto* curve : {&trace.control, &trace.violation}) {
    curve->pooling = options.pooling;
    curve->pr_by_layer.resize(layers);
    curve->n_effective.resize(layers);
  }
  trace.control.condition = Condition::Control;
  trace.violation.condition = Condition::Violation;
  parallel_for(static_cast<std::size_t>(2 * layers), jobs, [&](std::size_t task) {
    const int l = static_cast<int>(task / 2);
    PRCurve& curve = task % 2 == 0 ? trace.control : trace.violation;
    const LayerPR r = compute_layer_pr(run, l + 1, curve.condition, options);
    curve.pr_by_layer(l) = r.pr;
    curve.n_effective(l) = r.n_effective;
  });
  trace.diff = trace.violation.pr_by_layer - trace.control.pr_by_layer;
  return trace;
}

std::string pr_csv(const PRTrace& trace) {
  std::ostringstream out;
  out << "layer,pr_control,pr_violation,diff\n";
  for (Eigen::Index l = 0; l < trace.diff.size(); ++l) {
    out << l + 1 << ',' << csv::format_double(trace.control.pr_by_layer(l)) << ','
        << csv::format_double(trace.violation.pr_by_layer(l)) << ','
        << csv::format_double(trace.diff(l)) << '\n';
  }
  return out.str();
}

}  // namespace probescope
