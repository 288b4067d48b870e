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

#ifndef PROBESCOPE_MOMENTS_HPP_
#define PROBESCOPE_MOMENTS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "probescope/error.hpp"

namespace probescope {

/// Below this sample variance skewness and kurtosis are reported as undefined.
inline constexpr double kMinMomentVariance = 1e-12;

template <typename Scalar>
struct MomentDescriptor {
  Scalar mean{};
  Scalar median{};
  Scalar variance{};  ///< unbiased, divisor N-1 (0 for N=1)
  Scalar skewness{};  ///< Fisher-Pearson g1
  Scalar kurtosis{};  ///< excess kurtosis g2
};

enum class OnDegenerate { Throw, NaN };

/// Linear-interpolation quantile (h = (n-1)p) of an unsorted buffer. The
/// buffer is reordered.
template <typename Scalar>
Scalar quantile_inplace(std::span<Scalar> values, double p) {
  if (values.empty()) throw DegenerateError("quantile of an empty sample");
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const Scalar frac = static_cast<Scalar>(h - static_cast<double>(lo));
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const Scalar x_lo = values[lo];
  if (lo + 1 >= values.size() || frac == Scalar(0)) return x_lo;
  const Scalar x_hi = *std::min_element(values.begin() + lo + 1, values.end());
  return x_lo + frac * (x_hi - x_lo);
}

template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& values, double p) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> buf(static_cast<std::size_t>(values.size()));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < values.cols(); ++j)
    for (Eigen::Index i = 0; i < values.rows(); ++i) buf[k++] = values(i, j);
  return quantile_inplace<Scalar>(buf, p);
}

template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& values) {
  return quantile(values, 0.5);
}

/// Interquartile range Q(0.75) - Q(0.25) under the linear rule.
template <typename Derived>
typename Derived::Scalar iqr(const Eigen::DenseBase<Derived>& values) {
  return quantile(values, 0.75) - quantile(values, 0.25);
}

/// Mean, median, unbiased variance, skewness g1 and excess kurtosis g2 of
/// all coefficients of `values`.
///
/// Central moments are formed from sums, g1 = sqrt(n) S3 / S2^(3/2) and
/// g2 = n S4 / S2^2 - 3, which keeps small integer inputs exact.
template <typename Derived>
MomentDescriptor<typename Derived::Scalar> moments(const Eigen::DenseBase<Derived>& values,
                                                   OnDegenerate policy = OnDegenerate::Throw) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  if (n < 1) throw DegenerateError("moments of an empty vector");
  MomentDescriptor<Scalar> m;
  m.mean = values.sum() / static_cast<Scalar>(n);
  m.median = median(values);
  const auto centered = (values.derived().array() - m.mean);
  const Scalar s2 = centered.square().sum();
  m.variance = n > 1 ? s2 / static_cast<Scalar>(n - 1) : Scalar(0);
  if (!(m.variance >= Scalar(kMinMomentVariance))) {
    if (policy == OnDegenerate::Throw)
      throw DegenerateError("skewness/kurtosis undefined: variance below 1e-12");
    m.skewness = m.kurtosis = std::numeric_limits<Scalar>::quiet_NaN();
    return m;
  }
  const Scalar s3 = centered.cube().sum();
  const Scalar s4 = centered.square().square().sum();
  const auto nn = static_cast<Scalar>(n);
  m.skewness = std::sqrt(nn) * s3 / (s2 * std::sqrt(s2));
  m.kurtosis = nn * s4 / (s2 * s2) - Scalar(3);
  return m;
}

}  // namespace probescope

#endif  // PROBESCOPE_MOMENTS_HPP_
