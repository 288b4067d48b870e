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

#ifndef PROBESCOPE_FEATURES_HPP_
#define PROBESCOPE_FEATURES_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "probescope/activation_io.hpp"
#include "probescope/moments.hpp"

namespace probescope {

enum class NormalizeMode { PooledScalar, PerDimension };

std::string to_string(NormalizeMode m);
NormalizeMode parse_normalize_mode(std::string_view text);

/// Median and IQR used to scale one layer. Length 1 for PooledScalar,
/// one entry per column for PerDimension.
struct NormalizationRecord {
  NormalizeMode mode = NormalizeMode::PooledScalar;
  std::string quantile_rule = "linear";
  Eigen::VectorXd median;
  Eigen::VectorXd iqr;
};

struct Normalized {
  Eigen::MatrixXd values;
  NormalizationRecord record;
};

/// (x - median) / IQR, either with one scalar pair over every entry or per column.
/// Throws DegenerateError when an IQR is zero.
Normalized robust_normalize(const Eigen::MatrixXd& values, NormalizeMode mode);

/// The five moment features, in descriptor order.
enum class Moment : std::uint8_t { Mean = 0, Median, Variance, Skewness, Kurtosis };
inline constexpr int kNumMoments = 5;
std::string_view to_string(Moment m);

/// Non-empty subset of the five moments as a bitmask (bit i = Moment i).
class FeatureSubset {
 public:
  constexpr FeatureSubset() = default;
  constexpr explicit FeatureSubset(std::uint8_t mask) : mask_(mask) {}
  static constexpr FeatureSubset mean_only() { return FeatureSubset(1); }
  static FeatureSubset of(std::initializer_list<Moment> moments);
  static FeatureSubset parse(const std::vector<std::string>& names);

  constexpr std::uint8_t mask() const { return mask_; }
  constexpr bool contains(Moment m) const { return (mask_ >> static_cast<int>(m)) & 1u; }
  constexpr bool empty() const { return mask_ == 0; }
  int size() const;
  std::vector<Moment> members() const;
  std::string label() const;  ///< e.g. "mean+skewness"
  bool is_superset_of(FeatureSubset other) const { return (mask_ & other.mask_) == other.mask_; }

  friend constexpr bool operator==(FeatureSubset, FeatureSubset) = default;

 private:
  std::uint8_t mask_ = 1;
};

struct FeatureTable {
  int layer = 0;
  Eigen::Matrix<double, Eigen::Dynamic, kNumMoments> values;  ///< one row per sentence
  Eigen::VectorXi labels;                                     ///< 1 = violation
  std::vector<std::int64_t> sentence_ids;
  std::vector<std::int64_t> pair_ids;
  NormalizationRecord normalization;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::MatrixXd select(FeatureSubset subset) const;
};

struct FeatureOptions {
  Pooling pooling = Pooling::Flatten;
  NormalizeMode normalize = NormalizeMode::PooledScalar;
  TokenPolicy token_policy = TokenPolicy::Strict;
  OnDegenerate on_degenerate = OnDegenerate::Throw;
};

/// Normalizes layer `layer` across all sentences, then takes per-sentence
/// moments of the normalized values. PooledScalar with Flatten accepts
/// ragged token counts.
FeatureTable build_feature_table(const ActivationRun& run, int layer,
                                 const FeatureOptions& options = {});

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& csv_path,
                       const std::string& comment = {});
nlohmann::json normalization_json(const NormalizationRecord& record);

}  // namespace probescope

#endif  // PROBESCOPE_FEATURES_HPP_
