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

#ifndef PROBESCOPE_DIMENSIONALITY_HPP_
#define PROBESCOPE_DIMENSIONALITY_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probescope/activation_io.hpp"
#include "probescope/error.hpp"

namespace probescope {

/// Eigenvalues below this fraction of the largest are treated as zero.
inline constexpr double kEigenFloor = 1e-10;

/// (sum lambda)^2 / sum lambda^2 over a non-negative spectrum.
template <typename Derived>
typename Derived::Scalar participation_ratio(const Eigen::DenseBase<Derived>& eigenvalues) {
  using Scalar = typename Derived::Scalar;
  const auto v = eigenvalues.derived().array();
  if (v.size() == 0 || !(v.maxCoeff() > Scalar(0)))
    throw DegenerateError("participation ratio: no positive eigenvalue");
  const Scalar sum = v.sum();
  return sum * sum / v.square().sum();
}

/// Clamps negatives to zero and zeroes entries below kEigenFloor * max.
Eigen::VectorXd floor_spectrum(const Eigen::VectorXd& eigenvalues, double floor = kEigenFloor);

enum class SpectrumRoute {
  Auto,        ///< Gram when n > N, covariance otherwise
  Gram,        ///< eigenvalues of the N x N matrix Xc Xc^T
  Covariance,  ///< eigenvalues of the n x n matrix Xc^T Xc
};

/// Nonzero covariance spectrum of the rows of `x` after column centering, up
/// to the common 1/(N-1) factor (which cancels in the participation ratio).
Eigen::VectorXd centered_spectrum(const Eigen::MatrixXd& x, SpectrumRoute route = SpectrumRoute::Auto);

/// Participation ratio of the row covariance of `x` (rows = samples).
double matrix_pr(const Eigen::MatrixXd& x, SpectrumRoute route = SpectrumRoute::Auto);

enum class Centering {
  PerCondition,  ///< each condition around its own mean
  Global,        ///< both conditions around the pooled mean
};

std::string to_string(Centering c);
Centering parse_centering(std::string_view text);

struct PROptions {
  Pooling pooling = Pooling::MeanTokens;
  TokenPolicy token_policy = TokenPolicy::TruncateToMin;
  Centering centering = Centering::PerCondition;
  SpectrumRoute route = SpectrumRoute::Auto;
};

double layer_pr(const ActivationRun& run, int layer, Condition condition,
                const PROptions& options = {});

struct PRCurve {
  Condition condition = Condition::Control;
  Eigen::VectorXd pr_by_layer;
  Pooling pooling = Pooling::MeanTokens;
  Eigen::VectorXi n_effective;  ///< min(N - 1, n) per layer
};

struct PRTrace {
  PRCurve control;
  PRCurve violation;
  Eigen::VectorXd diff;  ///< violation - control
};

PRTrace pr_difference_trace(const ActivationRun& run, const PROptions& options = {},
                            unsigned jobs = 1);

/// CSV `layer,pr_control,pr_violation,diff`.
std::string pr_csv(const PRTrace& trace);

}  // namespace probescope

#endif  // PROBESCOPE_DIMENSIONALITY_HPP_
