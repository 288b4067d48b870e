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

// probescope command line: gen-stimuli, synth, analyze, report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "probescope/activation_io.hpp"
#include "probescope/csv.hpp"
#include "probescope/error.hpp"
#include "probescope/pipeline.hpp"
#include "probescope/stimulus.hpp"
#include "probescope/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace probescope;

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("PROBESCOPE_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  std::int64_t v = -1;
  try {
    v = csv::parse_int(raw);
  } catch (const FormatError&) {
  }
  if (v < 0) throw ConfigError("PROBESCOPE_SEED must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

fs::path default_lexicon() { return fs::path(PROBESCOPE_DATA_DIR) / "default_lexicon.json"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probescope: layer-wise probing of transformer activations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);

  // gen-stimuli
  auto* gen = app.add_subcommand("gen-stimuli", "Expand a lexicon into a minimal-pair manifest");
  std::string lexicon_path = default_lexicon().string();
  std::string manifest_out = "manifest.csv";
  gen->add_option("--lexicon", lexicon_path, "Lexicon JSON")->capture_default_str();
  gen->add_option("--out", manifest_out, "Output manifest CSV")->capture_default_str();

  // synth
  auto* syn = app.add_subcommand("synth", "Write a synthetic activation run with a planted signal");
  std::string spec_path;
  std::string synth_out;
  std::optional<std::uint64_t> synth_seed;
  unsigned synth_jobs = 1;
  syn->add_option("--spec", spec_path, "Plant spec JSON (defaults if omitted)");
  syn->add_option("--out", synth_out, "Output run directory")->required();
  syn->add_option("--seed", synth_seed, "Overrides the spec seed");
  syn->add_option("--jobs", synth_jobs, "Worker threads")->check(CLI::PositiveNumber);

  // analyze
  auto* ana = app.add_subcommand("analyze", "Run the full analysis and write a bundle");
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<int> folds, permutations;
  std::optional<double> lambda, threshold, alpha;
  std::optional<std::string> unit, feature_pooling, normalize_mode, pr_pooling, token_policy;
  std::vector<std::string> features;
  bool resume = false, no_group_pairs = false, export_features = false;
  ana->add_option("--config", config_path, "Pipeline config JSON")->required();
  ana->add_option("--out", out_dir, "Bundle directory");
  ana->add_option("--seed", seed, "Master seed (else config, else PROBESCOPE_SEED, else 0)");
  ana->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  ana->add_option("--folds", folds, "Cross-validation folds");
  ana->add_option("--lambda", lambda, "L2 penalty");
  ana->add_option("--threshold", threshold, "Cluster-forming |t| threshold");
  ana->add_option("--permutations", permutations, "Sign-flip permutations");
  ana->add_option("--alpha", alpha, "Cluster significance level");
  ana->add_option("--permutation-unit", unit, "layer, fold or fold_layer");
  ana->add_option("--features", features, "Moment subset, e.g. mean skewness");
  ana->add_option("--feature-pooling", feature_pooling, "flatten, mean_tokens or last_token");
  ana->add_option("--normalize", normalize_mode, "pooled_scalar or per_dimension");
  ana->add_option("--pr-pooling", pr_pooling, "flatten, mean_tokens or last_token");
  ana->add_option("--token-policy", token_policy, "strict or truncate_to_min");
  ana->add_flag("--resume", resume, "Reuse cached stage outputs in the bundle directory");
  ana->add_flag("--no-group-pairs", no_group_pairs, "Split folds by sentence, not by pair");
  ana->add_flag("--export-features", export_features, "Write per-layer feature tables");

  // report
  auto* rep = app.add_subcommand("report", "Verify a bundle, print its summary, re-render plots");
  std::string bundle_dir;
  bool no_render = false;
  rep->add_option("--bundle", bundle_dir, "Bundle directory")->required();
  rep->add_flag("--no-render", no_render, "Do not rewrite the SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Config);
  }

  try {
    if (gen->parsed()) {
      const auto corpus = corpus_manifest(generate_corpus(load_lexicon(lexicon_path)));
      write_manifest_csv(corpus, fs::path(manifest_out));
      std::cout << "wrote " << corpus.sentences.size() << " sentences (" << corpus.control_count
                << " pairs) to " << manifest_out << '\n';
      return 0;
    }

    if (syn->parsed()) {
      json spec_doc = spec_path.empty() ? json::object() : read_json(spec_path);
      if (synth_seed) spec_doc["seed"] = *synth_seed;
      else if (!spec_doc.contains("seed"))
        if (auto s = env_seed()) spec_doc["seed"] = *s;
      const PlantSpec spec = plant_spec_from_json(spec_doc);
      write_run(generate_synthetic(spec, synth_jobs), synth_out);
      std::cout << "wrote " << 2 * spec.num_pairs << " sentences x " << spec.num_layers
                << " layers to " << synth_out << '\n';
      return 0;
    }

    if (ana->parsed()) {
      json doc = read_json(config_path);
      if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
      if (seed) doc["seed"] = *seed;
      if (folds) doc["folds"] = *folds;
      if (lambda) doc["lambda"] = *lambda;
      if (threshold) doc["threshold_t"] = *threshold;
      if (permutations) doc["num_permutations"] = *permutations;
      if (alpha) doc["alpha"] = *alpha;
      if (unit) doc["permutation_unit"] = *unit;
      if (!features.empty()) doc["features"] = features;
      if (feature_pooling) doc["feature_pooling"] = *feature_pooling;
      if (normalize_mode) doc["normalize_mode"] = *normalize_mode;
      if (pr_pooling) doc["pr_pooling"] = *pr_pooling;
      if (token_policy) doc["token_policy"] = *token_policy;
      if (no_group_pairs) doc["group_pairs"] = false;
      if (export_features) doc["export_features"] = true;
      PipelineConfig config =
          config_from_json(doc, env_seed(), fs::path(config_path).parent_path());
      if (out_dir) config.output_dir = *out_dir;
      if (jobs) config.jobs = *jobs;
      config.resume = resume;

      const PipelineResult result = run_pipeline(config);
      std::cout << "config_hash " << result.config_hash << '\n';
      if (result.decoding_from_cache) std::cout << "decoding: reused cache\n";
      if (result.pr_from_cache) std::cout << "participation ratio: reused cache\n";
      std::cout << "significant clusters: " << result.clusters.significant_count() << '\n';
      for (const auto& c : result.clusters.clusters) {
        if (c.significant)
          std::cout << "  layers " << c.cluster.first_layer << "-" << c.cluster.last_layer
                    << "  corrected p " << csv::format_double(c.corrected_p) << '\n';
      }
      std::cout << "bundle written to " << config.output_dir.string() << '\n';
      return 0;
    }

    if (rep->parsed()) {
      const auto problems = verify_bundle(bundle_dir);
      if (!problems.empty()) {
        for (const auto& p : problems) std::cerr << "provenance mismatch: " << p << '\n';
        throw FormatError("bundle " + bundle_dir + " failed provenance verification");
      }
      if (!no_render) render_plots(bundle_dir);
      std::cout << bundle_report(load_bundle(bundle_dir));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "probescope: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "probescope: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
