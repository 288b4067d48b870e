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

#ifndef PROBESCOPE_SUBSET_SWEEP_HPP_
#define PROBESCOPE_SUBSET_SWEEP_HPP_

#include <vector>

#include "probescope/decoding.hpp"

namespace probescope {

struct SubsetScore {
  FeatureSubset subset;
  DecodingResult result;
};

/// Decodes every non-empty subset of the five moments (31 entries, ordered by
/// bitmask, so the mean-only probe comes first) with identical folds.
std::vector<SubsetScore> subset_sweep(const FeatureTable& table, const CVSpec& cv,
                                      double lambda = 1.0);

/// Convenience overload building the table from a run.
std::vector<SubsetScore> subset_sweep(const ActivationRun& run, int layer, const CVSpec& cv,
                                      const FeatureOptions& features = {}, double lambda = 1.0);

}  // namespace probescope

#endif  // PROBESCOPE_SUBSET_SWEEP_HPP_
