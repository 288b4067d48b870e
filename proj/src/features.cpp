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

#include "probescope/features.hpp"

#include <bit>
#include <fstream>

#include "probescope/csv.hpp"
#include "probescope/error.hpp"

namespace probescope {

namespace {

constexpr std::array<std::string_view, kNumMoments> kMomentNames = {
    "mean", "median", "variance", "skewness", "kurtosis"};

struct Scale {
  double median;
  double iqr;
};

Scale robust_scale(std::vector<double>& buf) {
  const double med = quantile_inplace<double>(buf, 0.5);
  const double q1 = quantile_inplace<double>(buf, 0.25);
  const double q3 = quantile_inplace<double>(buf, 0.75);
  return {med, q3 - q1};
}

Eigen::Matrix<double, 1, kNumMoments> moment_row(const Eigen::Ref<const Eigen::RowVectorXd>& v,
                                                 OnDegenerate policy) {
  const auto m = moments(v, policy);
  Eigen::Matrix<double, 1, kNumMoments> row;
  row << m.mean, m.median, m.variance, m.skewness, m.kurtosis;
  return row;
}

}  // namespace

std::string to_string(NormalizeMode m) {
  return m == NormalizeMode::PooledScalar ? "pooled_scalar" : "per_dimension";
}

NormalizeMode parse_normalize_mode(std::string_view text) {
  if (text == "pooled_scalar") return NormalizeMode::PooledScalar;
  if (text == "per_dimension") return NormalizeMode::PerDimension;
  throw ConfigError("unknown normalize mode '" + std::string(text) + "'");
}

Normalized robust_normalize(const Eigen::MatrixXd& values, NormalizeMode mode) {
  if (values.rows() < 2) throw DegenerateError("robust_normalize needs at least 2 rows");
  Normalized out;
  out.record.mode = mode;
  if (mode == NormalizeMode::PooledScalar) {
    std::vector<double> buf(values.data(), values.data() + values.size());
    const Scale s = robust_scale(buf);
    if (!(s.iqr > 0.0)) throw DegenerateError("robust_normalize: IQR is zero for the whole layer");
    out.values = (values.array() - s.median) / s.iqr;
    out.record.median = Eigen::VectorXd::Constant(1, s.median);
    out.record.iqr = Eigen::VectorXd::Constant(1, s.iqr);
    return out;
  }
  out.values.resize(values.rows(), values.cols());
  out.record.median.resize(values.cols());
  out.record.iqr.resize(values.cols());
  std::vector<double> buf(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) buf[i] = values(i, j);
    const Scale s = robust_scale(buf);
    if (!(s.iqr > 0.0))
      throw DegenerateError("robust_normalize: IQR is zero in dimension " + std::to_string(j));
    out.values.col(j) = (values.col(j).array() - s.median) / s.iqr;
    out.record.median(j) = s.median;
    out.record.iqr(j) = s.iqr;
  }
  return out;
}

std::string_view to_string(Moment m) { return kMomentNames[static_cast<int>(m)]; }

FeatureSubset FeatureSubset::of(std::initializer_list<Moment> moments) {
  std::uint8_t mask = 0;
  for (auto m : moments) mask |= std::uint8_t(1u << static_cast<int>(m));
  return FeatureSubset(mask);
}

FeatureSubset FeatureSubset::parse(const std::vector<std::string>& names) {
  std::uint8_t mask = 0;
  for (const auto& name : names) {
    const auto it = std::find(kMomentNames.begin(), kMomentNames.end(), name);
    if (it == kMomentNames.end()) throw ConfigError("unknown feature '" + name + "'");
    mask |= std::uint8_t(1u << (it - kMomentNames.begin()));
  }
  if (mask == 0) throw ConfigError("feature subset must be non-empty");
  return FeatureSubset(mask);
}

int FeatureSubset::size() const { return std::popcount(mask_); }

std::vector<Moment> FeatureSubset::members() const {
  std::vector<Moment> out;
  for (int i = 0; i < kNumMoments; ++i)
    if (contains(static_cast<Moment>(i))) out.push_back(static_cast<Moment>(i));
  return out;
}

std::string FeatureSubset::label() const {
  std::string out;
  for (auto m : members()) {
    if (!out.empty()) out += '+';
    out += to_string(m);
  }
  return out;
}

Eigen::MatrixXd FeatureTable::select(FeatureSubset subset) const {
  if (subset.empty()) throw ConfigError("feature subset must be non-empty");
  const auto cols = subset.members();
  Eigen::MatrixXd x(values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    x.col(static_cast<Eigen::Index>(c)) = values.col(static_cast<int>(cols[c]));
  return x;
}

FeatureTable build_feature_table(const ActivationRun& run, int layer,
                                 const FeatureOptions& options) {
  if (layer < 1 || layer > run.num_layers)
    throw ConfigError("layer " + std::to_string(layer) + " outside 1.." +
                      std::to_string(run.num_layers));
  const auto n = static_cast<Eigen::Index>(run.size());
  if (n < 2) throw DegenerateError("feature table needs at least 2 sentences");

  FeatureTable table;
  table.layer = layer;
  table.values.resize(n, kNumMoments);
  table.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& info = run.info(static_cast<std::size_t>(i));
    table.labels(i) = info.condition == Condition::Violation ? 1 : 0;
    table.sentence_ids.push_back(info.sentence_id);
    table.pair_ids.push_back(info.pair_id);
  }

  if (options.pooling == Pooling::Flatten && options.normalize == NormalizeMode::PooledScalar) {
    // Ragged path: one scalar population over every activation of the layer.
    std::vector<Eigen::RowVectorXd> rows;
    rows.reserve(run.size());
    int t_min = run.sentences.front().token_count;
    for (const auto& s : run.sentences) t_min = std::min(t_min, s.token_count);
    const bool truncate = options.token_policy == TokenPolicy::TruncateToMin;
    std::size_t total = 0;
    for (const auto& s : run.sentences) {
      rows.push_back(pool_tensor(s.layers[layer - 1], Pooling::Flatten, truncate ? t_min : -1));
      total += static_cast<std::size_t>(rows.back().size());
    }
    std::vector<double> pooled;
    pooled.reserve(total);
    for (const auto& r : rows) pooled.insert(pooled.end(), r.data(), r.data() + r.size());
    const Scale s = robust_scale(pooled);
    if (!(s.iqr > 0.0))
      throw DegenerateError("layer " + std::to_string(layer) + ": IQR is zero for the whole layer");
    table.normalization.mode = NormalizeMode::PooledScalar;
    table.normalization.median = Eigen::VectorXd::Constant(1, s.median);
    table.normalization.iqr = Eigen::VectorXd::Constant(1, s.iqr);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::RowVectorXd z = (rows[i].array() - s.median) / s.iqr;
      table.values.row(i) = moment_row(z, options.on_degenerate);
    }
    return table;
  }

  const Eigen::MatrixXd x = layer_matrix(run, layer, options.pooling, options.token_policy);
  const Normalized z = robust_normalize(x, options.normalize);
  table.normalization = z.record;
  for (Eigen::Index i = 0; i < n; ++i)
    table.values.row(i) = moment_row(z.values.row(i), options.on_degenerate);
  return table;
}

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& csv_path,
                       const std::string& comment) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + csv_path.string());
  if (!comment.empty()) out << comment << '\n';
  out << "sentence_id,condition,mean,median,variance,skewness,kurtosis\n";
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    out << table.sentence_ids[i] << ','
        << (table.labels(i) == 1 ? "violation" : "control");
    for (int c = 0; c < kNumMoments; ++c) out << ',' << csv::format_double(table.values(i, c));
    out << '\n';
  }
  if (!out) throw FormatError("write failed: " + csv_path.string());
}

nlohmann::json normalization_json(const NormalizationRecord& record) {
  auto vec = [](const Eigen::VectorXd& v) {
    std::vector<double> out(v.data(), v.data() + v.size());
    return out;
  };
  return {{"mode", to_string(record.mode)},
          {"quantile_rule", record.quantile_rule},
          {"median", vec(record.median)},
          {"iqr", vec(record.iqr)}};
}

}  // namespace probescope
