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

#ifndef PROBESCOPE_CLUSTER_STATS_HPP_
#define PROBESCOPE_CLUSTER_STATS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace probescope {

/// Fold-level decoding scores: k rows (folds) by L columns (layers 1..L).
struct LayerTrace {
  Eigen::MatrixXd fold_scores;
  double chance = 0.5;

  int folds() const { return static_cast<int>(fold_scores.rows()); }
  int layers() const { return static_cast<int>(fold_scores.cols()); }
};

void validate(const LayerTrace& trace);

struct LayerTStats {
  Eigen::VectorXd t;             ///< may hold +/-inf where fold variance is zero
  std::vector<int> infinite_layers;  ///< 1-based
  int df = 0;
};

/// One-sample t of (fold score - chance) per layer with df = k - 1. A layer
/// with zero spread gets t = 0 when its mean equals chance and a signed
/// infinity otherwise.
LayerTStats layer_tstats(const LayerTrace& trace);

/// t for an arbitrary k x L deviation matrix (scores - chance).
LayerTStats tstats_from_deviations(const Eigen::MatrixXd& deviations);

/// Cluster statistic contribution of an infinite t.
inline constexpr double kInfiniteTCap = 1e6;

struct Cluster {
  int first_layer = 0;  ///< 1-based, inclusive
  int last_layer = 0;   ///< 1-based, inclusive
  double stat = 0.0;    ///< sum of t over the run
};

/// Maximal runs of consecutive layers with |t| > threshold and constant sign.
std::vector<Cluster> find_clusters(const Eigen::VectorXd& t, double threshold,
                                   double infinite_cap = kInfiniteTCap);

/// Exchangeable unit for sign flipping.
enum class PermutationUnit {
  Layer,      ///< flip each layer's fold deviations together (t_l -> -t_l)
  Fold,       ///< flip each fold's whole deviation trace across layers
  FoldLayer,  ///< flip every (fold, layer) deviation independently
};

std::string to_string(PermutationUnit u);
PermutationUnit parse_permutation_unit(std::string_view text);

struct PermutationOptions {
  double threshold = 2.78;
  int num_permutations = 1000;
  double alpha = 0.01;
  std::uint64_t seed = 0;
  PermutationUnit unit = PermutationUnit::Layer;
  double infinite_cap = kInfiniteTCap;
};

struct ReportedCluster {
  Cluster cluster;
  double corrected_p = 1.0;
  bool significant = false;
};

struct ClusterReport {
  std::vector<ReportedCluster> clusters;
  Eigen::VectorXd t;
  std::vector<int> infinite_layers;
  double threshold_t = 0.0;
  int num_permutations = 0;  ///< patterns evaluated (all 2^units when exact)
  double alpha = 0.0;
  std::uint64_t seed = 0;
  PermutationUnit unit = PermutationUnit::Layer;
  bool exact = false;
  Eigen::VectorXd null_max;  ///< max |cluster stat| per permutation

  int significant_count() const;
};

/// Cluster-based sign-flip permutation test over the layer axis.
///
/// Null maxima are max |cluster stat| per sign pattern (0 when no cluster).
/// When 2^units <= num_permutations every pattern is enumerated and
/// p = #{max >= |stat|} / 2^units; otherwise patterns are sampled from
/// per-permutation substreams of (seed, index) and p = (1 + #) / (N + 1).
ClusterReport permutation_test(const LayerTrace& trace, const PermutationOptions& options = {});

nlohmann::json to_json(const ClusterReport& report);
std::string cluster_csv(const ClusterReport& report);

}  // namespace probescope

#endif  // PROBESCOPE_CLUSTER_STATS_HPP_
