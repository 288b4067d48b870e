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

#ifndef PROBESCOPE_ROC_HPP_
#define PROBESCOPE_ROC_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "probescope/error.hpp"

namespace probescope {

/// ROC-AUC as the Mann-Whitney statistic: the fraction of (positive,
/// negative) pairs in which the positive scores higher, ties counting 1/2.
///
/// Labels are 1 for positive and 0 for negative. Ranks are accumulated as
/// doubled integers so the result is count / (n_pos * n_neg) with an exact
/// integer numerator.
template <typename ScoreDerived, typename LabelDerived>
double roc_auc(const Eigen::DenseBase<ScoreDerived>& scores,
               const Eigen::DenseBase<LabelDerived>& labels) {
  const Eigen::Index n = scores.size();
  if (labels.size() != n) throw ConfigError("roc_auc: scores and labels differ in length");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });

  std::int64_t n_pos = 0;
  std::int64_t rank2_pos = 0;  // sum over positives of 2 * midrank (1-based)
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && scores(order[j]) == scores(order[i])) ++j;
    // Tied block occupies 1-based ranks i+1..j; doubled midrank is i+1+j.
    const auto rank2 = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels(order[k]) != 0) {
        ++n_pos;
        rank2_pos += rank2;
      }
    }
    i = j;
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateError("roc_auc: labels contain a single class");
  const std::int64_t u2 = rank2_pos - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / static_cast<double>(2 * n_pos * n_neg);
}

}  // namespace probescope

#endif  // PROBESCOPE_ROC_HPP_
