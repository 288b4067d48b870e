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

#ifndef PROBESCOPE_ACTIVATION_IO_HPP_
#define PROBESCOPE_ACTIVATION_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probescope/stimulus.hpp"

namespace probescope {

/// One layer's hidden states for one sentence: token_count x hidden_dim,
/// row-major to match the on-disk layout.
using LayerTensor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SentenceActivations {
  std::int64_t sentence_id = 0;
  int token_count = 0;
  std::vector<LayerTensor> layers;  // layers[l-1] holds layer l
};

/// A full hidden-state dump. `sentences[i]` corresponds to
/// `manifest.sentences[i]`.
struct ActivationRun {
  std::string model_name;
  std::string extraction_point;
  int num_layers = 0;
  int hidden_dim = 0;
  CorpusManifest manifest;
  std::vector<SentenceActivations> sentences;

  std::size_t size() const { return sentences.size(); }
  const Sentence& info(std::size_t i) const { return manifest.sentences[i]; }
};

inline constexpr std::uint32_t kActivationFormatVersion = 1;
inline constexpr char kActivationMagic[4] = {'A', 'C', 'T', 'V'};

/// Checks shape, alignment with the manifest, and finiteness.
/// Throws FormatError naming the sentence id and (1-based) layer.
void validate_run(const ActivationRun& run);

/// Writes `manifest.json` and `activations.bin` into `dir` (created if needed).
void write_run(const ActivationRun& run, const std::filesystem::path& dir);

struct ReadOptions {
  /// When set, only these sentence ids are materialized.
  std::optional<std::set<std::int64_t>> sentence_ids;
};

ActivationRun read_run(const std::filesystem::path& dir, const ReadOptions& options = {});

enum class Pooling { Flatten, MeanTokens, LastToken };

/// How `Flatten` reconciles sentences with different token counts.
enum class TokenPolicy { Strict, TruncateToMin };

std::string to_string(Pooling p);
Pooling parse_pooling(std::string_view text);
std::string to_string(TokenPolicy p);
TokenPolicy parse_token_policy(std::string_view text);

/// Pools one sentence's layer tensor into a row vector (double precision).
/// For Flatten, `tokens` limits the rows used (row-major concatenation).
Eigen::RowVectorXd pool_tensor(const LayerTensor& h, Pooling pooling, int tokens = -1);

/// N x n design matrix for 1-based `layer`, one row per selected sentence
/// (all sentences when `rows` is empty).
Eigen::MatrixXd layer_matrix(const ActivationRun& run, int layer, Pooling pooling,
                             TokenPolicy policy = TokenPolicy::Strict,
                             std::span<const std::size_t> rows = {});

/// Indices into run.sentences with the given condition, manifest order.
std::vector<std::size_t> condition_rows(const ActivationRun& run, Condition condition);

}  // namespace probescope

#endif  // PROBESCOPE_ACTIVATION_IO_HPP_
