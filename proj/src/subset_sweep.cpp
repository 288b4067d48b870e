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

#include "probescope/subset_sweep.hpp"

namespace probescope {

std::vector<SubsetScore> subset_sweep(const FeatureTable& table, const CVSpec& cv, double lambda) {
  std::vector<SubsetScore> out;
  out.reserve((1u << kNumMoments) - 1);
  for (unsigned mask = 1; mask < (1u << kNumMoments); ++mask) {
    const FeatureSubset subset(static_cast<std::uint8_t>(mask));
    out.push_back({subset, decode_layer(table, subset, cv, lambda)});
  }
  return out;
}

std::vector<SubsetScore> subset_sweep(const ActivationRun& run, int layer, const CVSpec& cv,
                                      const FeatureOptions& features, double lambda) {
  return subset_sweep(build_feature_table(run, layer, features), cv, lambda);
}

}  // namespace probescope
