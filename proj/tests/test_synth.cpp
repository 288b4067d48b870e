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

#include <doctest.h>

#include <cmath>

#include "probescope/error.hpp"
#include "probescope/synth.hpp"
#include "test_util.hpp"

using namespace probescope;

namespace {

PlantSpec small_spec() {
  PlantSpec s;
  s.num_layers = 6;
  s.hidden_dim = 8;
  s.num_pairs = 400;
  s.token_count = 3;
  s.signal_first = 3;
  s.signal_last = 4;
  s.effect_size = 2.0;
  s.noise_sd = 1.5;
  s.seed = 11;
  return s;
}

// Per-sentence flattened mean of one layer, split by condition.
std::pair<Eigen::VectorXd, Eigen::VectorXd> mean_feature(const ActivationRun& run, int layer) {
  const Eigen::MatrixXd x = layer_matrix(run, layer, Pooling::Flatten);
  const Eigen::VectorXd m = x.rowwise().mean();
  const auto c = condition_rows(run, Condition::Control);
  const auto v = condition_rows(run, Condition::Violation);
  Eigen::VectorXd mc(c.size()), mv(v.size());
  for (std::size_t i = 0; i < c.size(); ++i) mc(i) = m(c[i]);
  for (std::size_t i = 0; i < v.size(); ++i) mv(i) = m(v[i]);
  return {mc, mv};
}

double sample_sd(const Eigen::VectorXd& x) {
  return std::sqrt((x.array() - x.mean()).square().sum() / (x.size() - 1));
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("planted direction is a unit vector") {
  PlantSpec s = small_spec();
  CHECK(planted_direction(s).norm() == doctest::Approx(1.0).epsilon(1e-12));
  s.direction = PlantDirection::Random;
  CHECK(planted_direction(s).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(planted_shift(s) == doctest::Approx(2.0 * 1.5 / std::sqrt(3.0)));
}

TEST_CASE("bookkeeping: violation minus control is the planted shift in band only") {
  // With the noise switched off the generator's shift is visible directly;
  // noise_sd must stay positive, so use a tiny value and tolerate it.
  PlantSpec s = small_spec();
  s.noise_sd = 1e-6;
  s.num_pairs = 2;
  const ActivationRun run = generate_synthetic(s);
  const Eigen::VectorXd u = planted_direction(s);
  for (int l = 1; l <= s.num_layers; ++l) {
    const Eigen::MatrixXd pooled = layer_matrix(run, l, Pooling::MeanTokens);
    const Eigen::VectorXd diff = (pooled.row(1) - pooled.row(0)).transpose();
    const double along = diff.dot(u);
    const double expected = (l >= 3 && l <= 4) ? planted_shift(s) : 0.0;
    CHECK(along == doctest::Approx(expected).epsilon(1e-4).scale(1.0));
    CHECK((diff - along * u).norm() < 1e-4);
  }
}

TEST_CASE("mean feature has signal to noise ratio equal to the effect size") {
  PlantSpec s = small_spec();
  s.num_pairs = 4000;
  const ActivationRun run = generate_synthetic(s, 2);
  const auto [mc, mv] = mean_feature(run, 3);
  const double pooled_sd = std::sqrt(0.5 * (std::pow(sample_sd(mc), 2) + std::pow(sample_sd(mv), 2)));
  const double snr = (mv.mean() - mc.mean()) / pooled_sd;
  // Sampling sd of the estimate is about sqrt(2/4000 + snr^2/16000) = 0.027.
  CHECK(snr == doctest::Approx(2.0).epsilon(0.05));
  const auto [oc, ov] = mean_feature(run, 1);
  CHECK(std::abs((ov.mean() - oc.mean()) / pooled_sd) < 0.1);
}

TEST_CASE("null spec: conditions are exchangeable") {
  PlantSpec s = small_spec();
  s.effect_size = 0.0;
  s.num_pairs = 2000;
  const ActivationRun run = generate_synthetic(s);
  for (int l = 1; l <= s.num_layers; ++l) {
    const auto [mc, mv] = mean_feature(run, l);
    CHECK(std::abs(mv.mean() - mc.mean()) / sample_sd(mc) < 0.15);
  }
}

TEST_CASE("same seed is byte identical, thread count does not matter") {
  testing::TempDir a("synth-a"), b("synth-b"), c("synth-c");
  const PlantSpec s = small_spec();
  write_run(generate_synthetic(s, 1), a.path());
  write_run(generate_synthetic(s, 1), b.path());
  write_run(generate_synthetic(s, 3), c.path());
  CHECK(testing::slurp(a / "activations.bin") == testing::slurp(b / "activations.bin"));
  CHECK(testing::slurp(a / "activations.bin") == testing::slurp(c / "activations.bin"));
  CHECK(testing::slurp(a / "manifest.json") == testing::slurp(c / "manifest.json"));

  PlantSpec other = s;
  other.seed = 12;
  testing::TempDir d("synth-d");
  write_run(generate_synthetic(other), d.path());
  CHECK(testing::slurp(a / "activations.bin") != testing::slurp(d / "activations.bin"));
}

TEST_CASE("generated run has the corpus layout") {
  const ActivationRun run = generate_synthetic(small_spec());
  CHECK(run.size() == 800);
  CHECK(run.manifest.control_count == 400);
  CHECK(run.info(5).pair_id == 2);
  CHECK(run.info(5).condition == Condition::Violation);
  CHECK(run.model_name == "synthetic");
  validate_run(run);
}

TEST_CASE("spec json round trip and validation") {
  const PlantSpec s = small_spec();
  const PlantSpec back = plant_spec_from_json(to_json(s));
  CHECK(to_json(back) == to_json(s));
  CHECK(plant_spec_from_json(nlohmann::json::object()).num_layers == 32);
  CHECK_THROWS_AS(plant_spec_from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(plant_spec_from_json({{"signal_layers", {5, 2}}}), ConfigError);
  CHECK_THROWS_AS(plant_spec_from_json({{"num_layers", "many"}}), ConfigError);
  CHECK_THROWS_AS(plant_spec_from_json({{"noise_sd", 0.0}}), ConfigError);
  CHECK_THROWS_AS(plant_spec_from_json({{"effect_size", -1.0}}), ConfigError);
  CHECK_THROWS_AS(plant_spec_from_json({{"num_layers", 10}}), ConfigError);  // band 18..30 outside
}

}  // TEST_SUITE
