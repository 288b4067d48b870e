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

#ifndef PROBESCOPE_PIPELINE_HPP_
#define PROBESCOPE_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "probescope/cluster_stats.hpp"
#include "probescope/decoding.hpp"
#include "probescope/dimensionality.hpp"
#include "probescope/features.hpp"
#include "probescope/synth.hpp"

namespace probescope {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Everything that determines an analysis. `output_dir`, `jobs` and
/// `resume` only affect where and how fast, so they are left out of the
/// canonical form and the config hash.
struct PipelineConfig {
  // Corpus source (optional, checked against the run's texts).
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> corpus_manifest;
  // Activation source: exactly one.
  std::optional<PlantSpec> synthetic;
  std::optional<std::filesystem::path> run_dir;

  int folds = 5;
  double lambda = 1.0;
  bool group_pairs = true;
  FeatureSubset features = FeatureSubset::mean_only();
  FeatureOptions feature_options{Pooling::Flatten, NormalizeMode::PooledScalar,
                                 TokenPolicy::TruncateToMin, OnDegenerate::Throw};
  PROptions pr_options;
  double threshold_t = 2.78;
  int num_permutations = 1000;
  double alpha = 0.01;
  PermutationUnit permutation_unit = PermutationUnit::Layer;
  std::uint64_t seed = 0;
  bool export_features = false;
  std::vector<int> subset_sweep_layers;

  std::filesystem::path output_dir = "probescope-out";
  unsigned jobs = 1;
  bool resume = false;
};

void validate(const PipelineConfig& config);

/// Reads a config document. A missing "seed" falls back to `seed_fallback`
/// (the CLI passes PROBESCOPE_SEED here) and then to 0. Relative paths are
/// resolved against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& doc,
                                std::optional<std::uint64_t> seed_fallback = std::nullopt,
                                const std::filesystem::path& base_dir = {});

/// Canonical analysis-relevant form (sorted keys).
nlohmann::json canonical_json(const PipelineConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// FNV-1a over canonical_json(config).dump().
std::string config_hash(const PipelineConfig& config);
std::string config_hash(const nlohmann::json& canonical);

/// Failure inside a pipeline stage; keeps the kind (and exit code) of the cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineResult {
  std::vector<DecodingResult> decoding;
  ClusterReport clusters;
  PRTrace pr;
  std::string config_hash;
  std::vector<std::string> files;  ///< bundle-relative, sorted
  bool decoding_from_cache = false;
  bool pr_from_cache = false;
};

/// Runs corpus -> activations -> features -> decoding -> cluster stats ->
/// participation ratio -> plots, writing the bundle into config.output_dir.
/// Outputs are staged and only moved into place on success; on failure the
/// staged files are left in output_dir/quarantine.
PipelineResult run_pipeline(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Bundles on disk
// ---------------------------------------------------------------------------

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// "# probescope 0.1.0 config_hash=<hex> seed=<n>"
std::string provenance_comment(const Provenance& p);
std::optional<Provenance> parse_provenance_comment(std::string_view line);

struct SummaryRow {
  int layer = 0;
  double mean_auc = 0.0;
  double sem = 0.0;
};

struct PRRow {
  int layer = 0;
  double control = 0.0;
  double violation = 0.0;
  double diff = 0.0;
};

struct BundleCluster {
  int first_layer = 0;
  int last_layer = 0;
  double stat = 0.0;
  double corrected_p = 1.0;
  bool significant = false;
};

struct Bundle {
  Provenance provenance;
  nlohmann::json config;
  std::vector<SummaryRow> summary;
  std::vector<BundleCluster> clusters;
  std::vector<PRRow> pr;
};

Bundle load_bundle(const std::filesystem::path& dir);

/// Files whose provenance does not match a re-hash of config.json. Empty
/// when the bundle is consistent.
std::vector<std::string> verify_bundle(const std::filesystem::path& dir);

/// Writes auc_by_layer.svg and pr_by_layer.svg from the bundle's tables.
void render_plots(const std::filesystem::path& dir);

std::string auc_svg(const std::vector<SummaryRow>& summary,
                    const std::vector<BundleCluster>& clusters, const Provenance& provenance);
std::string pr_svg(const std::vector<PRRow>& rows, const Provenance& provenance);

/// Plain-text summary used by `probescope report`.
std::string bundle_report(const Bundle& bundle);

}  // namespace probescope

#endif  // PROBESCOPE_PIPELINE_HPP_
