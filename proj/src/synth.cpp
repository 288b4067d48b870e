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

#include "probescope/synth.hpp"

#include <cmath>

#include "probescope/error.hpp"
#include "probescope/parallel.hpp"
#include "probescope/random.hpp"

namespace probescope {

namespace {

// Stream ids below this are sentence ids; the direction uses a reserved one.
constexpr std::uint64_t kDirectionStream = 0xD1EC71011ULL << 32;

}  // namespace

void validate(const PlantSpec& spec) {
  if (spec.num_layers < 1) throw ConfigError("plant spec: num_layers must be >= 1");
  if (spec.hidden_dim < 1) throw ConfigError("plant spec: hidden_dim must be >= 1");
  if (spec.num_pairs < 1) throw ConfigError("plant spec: num_pairs must be >= 1");
  if (spec.token_count < 1) throw ConfigError("plant spec: token_count must be >= 1");
  if (spec.signal_first < 1 || spec.signal_first > spec.signal_last ||
      spec.signal_last > spec.num_layers)
    throw ConfigError("plant spec: signal layers must satisfy 1 <= first <= last <= num_layers");
  if (!(spec.effect_size >= 0.0) || !std::isfinite(spec.effect_size))
    throw ConfigError("plant spec: effect_size must be finite and >= 0");
  if (!(spec.noise_sd > 0.0) || !std::isfinite(spec.noise_sd))
    throw ConfigError("plant spec: noise_sd must be finite and > 0");
}

nlohmann::json to_json(const PlantSpec& spec) {
  return {{"num_layers", spec.num_layers},
          {"hidden_dim", spec.hidden_dim},
          {"num_pairs", spec.num_pairs},
          {"token_count", spec.token_count},
          {"signal_layers", {spec.signal_first, spec.signal_last}},
          {"effect_size", spec.effect_size},
          {"noise_sd", spec.noise_sd},
          {"seed", spec.seed},
          {"direction", spec.direction == PlantDirection::Uniform ? "uniform" : "random"}};
}

PlantSpec plant_spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("plant spec: expected a JSON object");
  PlantSpec spec;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "num_layers") spec.num_layers = value.get<int>();
      else if (key == "hidden_dim") spec.hidden_dim = value.get<int>();
      else if (key == "num_pairs") spec.num_pairs = value.get<int>();
      else if (key == "token_count") spec.token_count = value.get<int>();
      else if (key == "signal_layers") {
        if (!value.is_array() || value.size() != 2)
          throw ConfigError("plant spec: signal_layers must be [first, last]");
        spec.signal_first = value[0].get<int>();
        spec.signal_last = value[1].get<int>();
      } else if (key == "effect_size") spec.effect_size = value.get<double>();
      else if (key == "noise_sd") spec.noise_sd = value.get<double>();
      else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else if (key == "direction") {
        const auto d = value.get<std::string>();
        if (d == "uniform") spec.direction = PlantDirection::Uniform;
        else if (d == "random") spec.direction = PlantDirection::Random;
        else throw ConfigError("plant spec: unknown direction '" + d + "'");
      } else {
        throw ConfigError("plant spec: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plant spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

Eigen::VectorXd planted_direction(const PlantSpec& spec) {
  const Eigen::Index d = spec.hidden_dim;
  if (spec.direction == PlantDirection::Uniform)
    return Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  Rng rng(spec.seed, kDirectionStream);
  Eigen::VectorXd u(d);
  do {
    for (Eigen::Index j = 0; j < d; ++j) u(j) = rng.normal();
  } while (u.norm() == 0.0);
  return u / u.norm();
}

double planted_shift(const PlantSpec& spec) {
  return spec.effect_size * spec.noise_sd / std::sqrt(static_cast<double>(spec.token_count));
}

ActivationRun generate_synthetic(const PlantSpec& spec, unsigned jobs) {
  validate(spec);
  ActivationRun run;
  run.model_name = "synthetic";
  run.extraction_point = "synthetic";
  run.num_layers = spec.num_layers;
  run.hidden_dim = spec.hidden_dim;

  std::vector<StimulusPair> pairs;
  pairs.reserve(spec.num_pairs);
  for (std::int64_t p = 0; p < spec.num_pairs; ++p) {
    const std::string stem = "synthetic pair " + std::to_string(p);
    pairs.push_back({p, {2 * p, stem + " control", Condition::Control, p},
                     {2 * p + 1, stem + " violation", Condition::Violation, p}});
  }
  run.manifest = corpus_manifest(pairs);
  run.sentences.resize(run.manifest.sentences.size());

  const Eigen::VectorXf shift =
      (planted_direction(spec) * planted_shift(spec)).cast<float>();
  const auto sd = static_cast<float>(spec.noise_sd);

  parallel_for(run.sentences.size(), jobs, [&](std::size_t i) {
    const Sentence& info = run.manifest.sentences[i];
    Rng rng(spec.seed, static_cast<std::uint64_t>(info.sentence_id));
    SentenceActivations s;
    s.sentence_id = info.sentence_id;
    s.token_count = spec.token_count;
    s.layers.reserve(spec.num_layers);
    for (int l = 1; l <= spec.num_layers; ++l) {
      LayerTensor h(spec.token_count, spec.hidden_dim);
      float* p = h.data();
      for (Eigen::Index k = 0; k < h.size(); ++k) p[k] = sd * static_cast<float>(rng.normal());
      if (info.condition == Condition::Violation && l >= spec.signal_first &&
          l <= spec.signal_last)
        h.rowwise() += shift.transpose();
      s.layers.push_back(std::move(h));
    }
    run.sentences[i] = std::move(s);
  });
  return run;
}

}  // namespace probescope
