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

#include "probescope/cluster_stats.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "probescope/csv.hpp"
#include "probescope/error.hpp"
#include "probescope/random.hpp"

namespace probescope {

void validate(const LayerTrace& trace) {
  if (trace.folds() < 2) throw ConfigError("layer trace: need at least 2 folds");
  if (trace.layers() < 1) throw ConfigError("layer trace: need at least 1 layer");
  if (!trace.fold_scores.allFinite()) throw FormatError("layer trace: non-finite fold scores");
  if ((trace.fold_scores.array() < 0.0).any() || (trace.fold_scores.array() > 1.0).any())
    throw FormatError("layer trace: fold scores must lie in [0, 1]");
}

LayerTStats tstats_from_deviations(const Eigen::MatrixXd& dev) {
  const auto k = static_cast<double>(dev.rows());
  LayerTStats out;
  out.df = static_cast<int>(dev.rows()) - 1;
  out.t.resize(dev.cols());
  for (Eigen::Index l = 0; l < dev.cols(); ++l) {
    const double mean = dev.col(l).mean();
    const double ss = (dev.col(l).array() - mean).square().sum();
    const double sd = std::sqrt(ss / (k - 1.0));
    if (sd > 0.0) {
      out.t(l) = mean / (sd / std::sqrt(k));
    } else if (mean == 0.0) {
      out.t(l) = 0.0;
    } else {
      out.t(l) = std::copysign(std::numeric_limits<double>::infinity(), mean);
      out.infinite_layers.push_back(static_cast<int>(l) + 1);
    }
  }
  return out;
}

LayerTStats layer_tstats(const LayerTrace& trace) {
  validate(trace);
  return tstats_from_deviations(trace.fold_scores.array() - trace.chance);
}

std::vector<Cluster> find_clusters(const Eigen::VectorXd& t, double threshold,
                                   double infinite_cap) {
  if (!(threshold > 0.0)) throw ConfigError("find_clusters: threshold must be > 0");
  std::vector<Cluster> clusters;
  int sign = 0;
  for (Eigen::Index l = 0; l < t.size(); ++l) {
    const double v = t(l);
    const int s = v > threshold ? 1 : (v < -threshold ? -1 : 0);
    if (s != 0 && s == sign) {
      clusters.back().last_layer = static_cast<int>(l) + 1;
    } else if (s != 0) {
      clusters.push_back({static_cast<int>(l) + 1, static_cast<int>(l) + 1, 0.0});
    }
    if (s != 0)
      clusters.back().stat += std::isinf(v) ? std::copysign(infinite_cap, v) : v;
    sign = s;
  }
  return clusters;
}

std::string to_string(PermutationUnit u) {
  switch (u) {
    case PermutationUnit::Layer: return "layer";
    case PermutationUnit::Fold: return "fold";
    case PermutationUnit::FoldLayer: return "fold_layer";
  }
  return "?";
}

PermutationUnit parse_permutation_unit(std::string_view text) {
  if (text == "layer") return PermutationUnit::Layer;
  if (text == "fold") return PermutationUnit::Fold;
  if (text == "fold_layer") return PermutationUnit::FoldLayer;
  throw ConfigError("unknown permutation unit '" + std::string(text) + "'");
}

int ClusterReport::significant_count() const {
  int n = 0;
  for (const auto& c : clusters) n += c.significant;
  return n;
}

namespace {

double max_abs_stat(const std::vector<Cluster>& clusters) {
  double m = 0.0;
  for (const auto& c : clusters) m = std::max(m, std::abs(c.stat));
  return m;
}

}  // namespace

ClusterReport permutation_test(const LayerTrace& trace, const PermutationOptions& options) {
  validate(trace);
  if (options.num_permutations < 1) throw ConfigError("permutation test: need >= 1 permutation");
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    throw ConfigError("permutation test: alpha must lie in (0, 1)");

  const Eigen::MatrixXd dev = trace.fold_scores.array() - trace.chance;
  const LayerTStats observed = tstats_from_deviations(dev);
  const auto clusters = find_clusters(observed.t, options.threshold, options.infinite_cap);

  const int k = trace.folds();
  const int layers = trace.layers();
  int units = layers;
  if (options.unit == PermutationUnit::Fold) units = k;
  if (options.unit == PermutationUnit::FoldLayer) units = k * layers;

  ClusterReport report;
  report.t = observed.t;
  report.infinite_layers = observed.infinite_layers;
  report.threshold_t = options.threshold;
  report.alpha = options.alpha;
  report.seed = options.seed;
  report.unit = options.unit;
  report.exact = units < 31 && (std::int64_t{1} << units) <= options.num_permutations;
  const std::int64_t patterns =
      report.exact ? (std::int64_t{1} << units) : std::int64_t{options.num_permutations};
  report.num_permutations = static_cast<int>(patterns);
  report.null_max.resize(patterns);

  std::vector<signed char> flips(static_cast<std::size_t>(units));
  Eigen::MatrixXd flipped(dev.rows(), dev.cols());
  Eigen::VectorXd t_perm(layers);
  for (std::int64_t p = 0; p < patterns; ++p) {
    if (report.exact) {
      for (int u = 0; u < units; ++u) flips[u] = ((p >> u) & 1) ? -1 : 1;
    } else {
      Rng rng(options.seed, static_cast<std::uint64_t>(p));
      for (int u = 0; u < units; ++u) flips[u] = rng.coin() ? -1 : 1;
    }
    switch (options.unit) {
      case PermutationUnit::Layer:
        for (int l = 0; l < layers; ++l) t_perm(l) = flips[l] * observed.t(l);
        break;
      case PermutationUnit::Fold:
        for (int f = 0; f < k; ++f) flipped.row(f) = flips[f] * dev.row(f);
        t_perm = tstats_from_deviations(flipped).t;
        break;
      case PermutationUnit::FoldLayer:
        for (int l = 0; l < layers; ++l)
          for (int f = 0; f < k; ++f) flipped(f, l) = flips[l * k + f] * dev(f, l);
        t_perm = tstats_from_deviations(flipped).t;
        break;
    }
    report.null_max(p) = max_abs_stat(find_clusters(t_perm, options.threshold, options.infinite_cap));
  }

  for (const auto& c : clusters) {
    // Relative slack so the identity pattern always counts against itself.
    const double bar = std::abs(c.stat) * (1.0 - 1e-12);
    const auto exceed = (report.null_max.array() >= bar).count();
    ReportedCluster rc;
    rc.cluster = c;
    rc.corrected_p = report.exact
                         ? static_cast<double>(exceed) / static_cast<double>(patterns)
                         : static_cast<double>(1 + exceed) / static_cast<double>(patterns + 1);
    rc.corrected_p = std::min(rc.corrected_p, 1.0);
    rc.significant = rc.corrected_p < options.alpha;
    report.clusters.push_back(rc);
  }
  return report;
}

nlohmann::json to_json(const ClusterReport& report) {
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t i = 0; i < report.clusters.size(); ++i) {
    const auto& c = report.clusters[i];
    clusters.push_back({{"cluster_id", i},
                        {"layer_start", c.cluster.first_layer},
                        {"layer_end", c.cluster.last_layer},
                        {"stat", c.cluster.stat},
                        {"corrected_p", c.corrected_p},
                        {"significant", c.significant}});
  }
  nlohmann::json t = nlohmann::json::array();
  for (Eigen::Index l = 0; l < report.t.size(); ++l) {
    const double v = report.t(l);
    if (std::isinf(v)) t.push_back(v > 0 ? "inf" : "-inf");
    else t.push_back(v);
  }
  return {{"clusters", clusters},
          {"t", t},
          {"infinite_layers", report.infinite_layers},
          {"threshold_t", report.threshold_t},
          {"num_permutations", report.num_permutations},
          {"alpha", report.alpha},
          {"seed", report.seed},
          {"permutation_unit", to_string(report.unit)},
          {"exact", report.exact}};
}

std::string cluster_csv(const ClusterReport& report) {
  std::ostringstream out;
  out << "cluster_id,layer_start,layer_end,stat,corrected_p,significant\n";
  for (std::size_t i = 0; i < report.clusters.size(); ++i) {
    const auto& c = report.clusters[i];
    out << i << ',' << c.cluster.first_layer << ',' << c.cluster.last_layer << ','
        << csv::format_double(c.cluster.stat) << ',' << csv::format_double(c.corrected_p) << ','
        << (c.significant ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace probescope
