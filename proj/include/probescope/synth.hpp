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

#ifndef PROBESCOPE_SYNTH_HPP_
#define PROBESCOPE_SYNTH_HPP_

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "probescope/activation_io.hpp"

namespace probescope {

enum class PlantDirection {
  Uniform,  ///< normalized all-ones vector; the scalar mean moment sees the full effect
  Random,   ///< unit vector drawn from the seed
};

/// Synthetic run with a condition signal planted in layers [signal_first, signal_last].
///
/// Every activation entry is N(0, noise_sd^2). Inside the band each violation
/// sentence is shifted on all tokens by effect_size * noise_sd / sqrt(token_count)
/// along a unit direction, so the condition means of the token-mean vector
/// differ by `effect_size` noise standard deviations along that direction.
struct PlantSpec {
  int num_layers = 32;
  int hidden_dim = 64;
  int num_pairs = 760;
  int token_count = 4;
  int signal_first = 18;
  int signal_last = 30;
  double effect_size = 3.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  PlantDirection direction = PlantDirection::Uniform;
};

void validate(const PlantSpec& spec);

nlohmann::json to_json(const PlantSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
PlantSpec plant_spec_from_json(const nlohmann::json& doc);

/// The unit direction the generator plants along, from the spec's seed.
Eigen::VectorXd planted_direction(const PlantSpec& spec);

/// Per-token shift magnitude added to violation sentences inside the band.
double planted_shift(const PlantSpec& spec);

/// Deterministic given spec; each sentence draws from its own substream of
/// (seed, sentence_id), so `jobs` never changes the output.
ActivationRun generate_synthetic(const PlantSpec& spec, unsigned jobs = 1);

}  // namespace probescope

#endif  // PROBESCOPE_SYNTH_HPP_
