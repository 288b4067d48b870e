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

#include "probescope/activation_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "probescope/error.hpp"

namespace probescope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kFileHeaderBytes = 8;
constexpr std::uint64_t kBlockHeaderBytes = 8;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

void put_f32(std::string& buf, float f) { put_u32(buf, std::bit_cast<std::uint32_t>(f)); }

std::uint64_t block_bytes(int layers, int tokens, int dim) {
  return kBlockHeaderBytes + std::uint64_t(layers) * std::uint64_t(tokens) * std::uint64_t(dim) * 4;
}

std::string where(std::int64_t sentence_id) {
  return "sentence_id " + std::to_string(sentence_id);
}

}  // namespace

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::Flatten: return "flatten";
    case Pooling::MeanTokens: return "mean_tokens";
    case Pooling::LastToken: return "last_token";
  }
  return "?";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "flatten") return Pooling::Flatten;
  if (text == "mean_tokens") return Pooling::MeanTokens;
  if (text == "last_token") return Pooling::LastToken;
  throw ConfigError("unknown pooling '" + std::string(text) + "'");
}

std::string to_string(TokenPolicy p) {
  return p == TokenPolicy::Strict ? "strict" : "truncate_to_min";
}

TokenPolicy parse_token_policy(std::string_view text) {
  if (text == "strict") return TokenPolicy::Strict;
  if (text == "truncate_to_min") return TokenPolicy::TruncateToMin;
  throw ConfigError("unknown token policy '" + std::string(text) + "'");
}

void validate_run(const ActivationRun& run) {
  if (run.num_layers < 1) throw FormatError("run: num_layers must be >= 1");
  if (run.hidden_dim < 1) throw FormatError("run: hidden_dim must be >= 1");
  if (run.sentences.size() != run.manifest.sentences.size())
    throw FormatError("run: " + std::to_string(run.sentences.size()) +
                      " activation blocks for " + std::to_string(run.manifest.sentences.size()) +
                      " manifest sentences");
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < run.sentences.size(); ++i) {
    const auto& s = run.sentences[i];
    if (s.sentence_id != run.manifest.sentences[i].sentence_id)
      throw FormatError("run: block " + std::to_string(i) + " has " + where(s.sentence_id) +
                        " but manifest lists " + where(run.manifest.sentences[i].sentence_id));
    if (!ids.insert(s.sentence_id).second)
      throw FormatError("run: duplicate " + where(s.sentence_id));
    if (s.sentence_id < 0 || s.sentence_id > 0xffffffffLL)
      throw FormatError("run: " + where(s.sentence_id) + " does not fit in u32");
    if (s.token_count < 1) throw FormatError("run: " + where(s.sentence_id) + " has no tokens");
    if (static_cast<int>(s.layers.size()) != run.num_layers)
      throw FormatError("run: " + where(s.sentence_id) + " has " +
                        std::to_string(s.layers.size()) + " layers, expected " +
                        std::to_string(run.num_layers));
    for (int l = 0; l < run.num_layers; ++l) {
      const auto& h = s.layers[l];
      if (h.rows() != s.token_count || h.cols() != run.hidden_dim)
        throw FormatError("run: " + where(s.sentence_id) + " layer " + std::to_string(l + 1) +
                          " has shape " + std::to_string(h.rows()) + "x" +
                          std::to_string(h.cols()) + ", expected " +
                          std::to_string(s.token_count) + "x" + std::to_string(run.hidden_dim));
      if (!h.allFinite())
        throw FormatError("run: non-finite value in " + where(s.sentence_id) + " layer " +
                          std::to_string(l + 1));
    }
  }
}

void write_run(const ActivationRun& run, const fs::path& dir) {
  validate_run(run);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());

  json sentences = json::array();
  std::ofstream bin(dir / "activations.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw FormatError("cannot write " + (dir / "activations.bin").string());

  std::string buf(kActivationMagic, 4);
  put_u32(buf, kActivationFormatVersion);
  bin.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  std::uint64_t offset = kFileHeaderBytes;

  for (std::size_t i = 0; i < run.sentences.size(); ++i) {
    const auto& s = run.sentences[i];
    const auto& info = run.manifest.sentences[i];
    buf.clear();
    buf.reserve(block_bytes(run.num_layers, s.token_count, run.hidden_dim));
    put_u32(buf, static_cast<std::uint32_t>(s.sentence_id));
    put_u32(buf, static_cast<std::uint32_t>(s.token_count));
    for (const auto& h : s.layers) {
      const float* p = h.data();
      for (Eigen::Index k = 0; k < h.size(); ++k) put_f32(buf, p[k]);
    }
    bin.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    sentences.push_back({{"sentence_id", info.sentence_id},
                         {"pair_id", info.pair_id},
                         {"condition", std::string(to_string(info.condition))},
                         {"text", info.text},
                         {"token_count", s.token_count},
                         {"offset", offset}});
    offset += buf.size();
  }
  bin.close();
  if (!bin) throw FormatError("write failed: " + (dir / "activations.bin").string());

  json manifest = {{"format_version", kActivationFormatVersion},
                   {"model_name", run.model_name},
                   {"extraction_point", run.extraction_point},
                   {"num_layers", run.num_layers},
                   {"hidden_dim", run.hidden_dim},
                   {"byte_order", "little"},
                   {"dtype", "f32"},
                   {"sentences", std::move(sentences)}};
  std::ofstream mf(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw FormatError("cannot write " + (dir / "manifest.json").string());
  mf << manifest.dump(2) << '\n';
  if (!mf) throw FormatError("write failed: " + (dir / "manifest.json").string());
}

namespace {

template <typename T>
T require(const json& obj, const char* key, const std::string& context) {
  if (!obj.contains(key)) throw FormatError(context + ": missing key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(context + ": key '" + key + "' has the wrong type");
  }
}

struct BlockIndex {
  Sentence info;
  int token_count;
  std::uint64_t offset;
};

}  // namespace

ActivationRun read_run(const fs::path& dir, const ReadOptions& options) {
  const fs::path manifest_path = dir / "manifest.json";
  const fs::path bin_path = dir / "activations.bin";
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw FormatError("cannot open " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(mf);
  } catch (const json::parse_error& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  const std::string ctx = "manifest.json";
  if (require<int>(doc, "format_version", ctx) != static_cast<int>(kActivationFormatVersion))
    throw FormatError("manifest.json: unsupported format_version");
  if (require<std::string>(doc, "byte_order", ctx) != "little")
    throw FormatError("manifest.json: unsupported byte_order");
  if (require<std::string>(doc, "dtype", ctx) != "f32")
    throw FormatError("manifest.json: unsupported dtype");

  ActivationRun run;
  run.model_name = require<std::string>(doc, "model_name", ctx);
  run.extraction_point = doc.value("extraction_point", std::string{});
  run.num_layers = require<int>(doc, "num_layers", ctx);
  run.hidden_dim = require<int>(doc, "hidden_dim", ctx);
  if (run.num_layers < 1 || run.hidden_dim < 1)
    throw FormatError("manifest.json: num_layers and hidden_dim must be >= 1");

  const json& entries = doc.contains("sentences") ? doc["sentences"] : json();
  if (!entries.is_array()) throw FormatError("manifest.json: 'sentences' must be an array");

  std::error_code ec;
  const auto file_size = fs::file_size(bin_path, ec);
  if (ec) throw FormatError("cannot stat " + bin_path.string());
  if (file_size < kFileHeaderBytes) throw FormatError("activations.bin: truncated header");

  std::vector<BlockIndex> index;
  index.reserve(entries.size());
  std::uint64_t expected_offset = kFileHeaderBytes;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string sctx = "manifest.json sentence " + std::to_string(i);
    const json& e = entries[i];
    BlockIndex b;
    b.info.sentence_id = require<std::int64_t>(e, "sentence_id", sctx);
    b.info.pair_id = require<std::int64_t>(e, "pair_id", sctx);
    b.info.condition = parse_condition(require<std::string>(e, "condition", sctx));
    b.info.text = require<std::string>(e, "text", sctx);
    b.token_count = require<int>(e, "token_count", sctx);
    b.offset = require<std::uint64_t>(e, "offset", sctx);
    if (b.token_count < 1) throw FormatError(sctx + ": token_count must be >= 1");
    const auto end = b.offset + block_bytes(run.num_layers, b.token_count, run.hidden_dim);
    if (end > file_size)
      throw FormatError(sctx + ": block [" + std::to_string(b.offset) + ", " +
                        std::to_string(end) + ") extends past end of activations.bin (" +
                        std::to_string(file_size) + " bytes)");
    if (b.offset != expected_offset)
      throw FormatError(sctx + ": offset " + std::to_string(b.offset) + " does not follow block " +
                        "layout (expected " + std::to_string(expected_offset) + ")");
    expected_offset = end;
    index.push_back(std::move(b));
  }
  if (expected_offset != file_size)
    throw FormatError("activations.bin: " + std::to_string(file_size - expected_offset) +
                      " trailing bytes after last block");

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw FormatError("cannot open " + bin_path.string());
  unsigned char header[kFileHeaderBytes];
  bin.read(reinterpret_cast<char*>(header), kFileHeaderBytes);
  if (!bin) throw FormatError("activations.bin: truncated header");
  if (std::memcmp(header, kActivationMagic, 4) != 0)
    throw FormatError("activations.bin: bad magic bytes");
  if (get_u32(header + 4) != kActivationFormatVersion)
    throw FormatError("activations.bin: unsupported version " + std::to_string(get_u32(header + 4)));

  std::vector<Sentence> kept;
  std::vector<unsigned char> raw;
  for (const auto& b : index) {
    if (options.sentence_ids && !options.sentence_ids->contains(b.info.sentence_id)) continue;
    const auto bytes = block_bytes(run.num_layers, b.token_count, run.hidden_dim);
    raw.resize(bytes);
    bin.seekg(static_cast<std::streamoff>(b.offset));
    bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!bin) throw FormatError("activations.bin: short read at offset " + std::to_string(b.offset));
    if (get_u32(raw.data()) != static_cast<std::uint32_t>(b.info.sentence_id) ||
        get_u32(raw.data() + 4) != static_cast<std::uint32_t>(b.token_count))
      throw FormatError("activations.bin: block header at offset " + std::to_string(b.offset) +
                        " disagrees with manifest for " + where(b.info.sentence_id));
    SentenceActivations s;
    s.sentence_id = b.info.sentence_id;
    s.token_count = b.token_count;
    s.layers.reserve(run.num_layers);
    const unsigned char* p = raw.data() + kBlockHeaderBytes;
    for (int l = 0; l < run.num_layers; ++l) {
      LayerTensor h(b.token_count, run.hidden_dim);
      float* out = h.data();
      for (Eigen::Index k = 0; k < h.size(); ++k, p += 4)
        out[k] = std::bit_cast<float>(get_u32(p));
      s.layers.push_back(std::move(h));
    }
    run.sentences.push_back(std::move(s));
    kept.push_back(b.info);
  }
  run.manifest = manifest_from_sentences(std::move(kept));
  validate_run(run);
  return run;
}

Eigen::RowVectorXd pool_tensor(const LayerTensor& h, Pooling pooling, int tokens) {
  switch (pooling) {
    case Pooling::Flatten: {
      const Eigen::Index t = tokens < 0 ? h.rows() : std::min<Eigen::Index>(tokens, h.rows());
      const auto block = h.topRows(t);
      Eigen::RowVectorXd row(t * h.cols());
      // RowMajor storage makes the contiguous buffer exactly vec() by rows.
      for (Eigen::Index k = 0; k < row.size(); ++k) row(k) = block.data()[k];
      return row;
    }
    case Pooling::MeanTokens:
      return h.cast<double>().colwise().mean();
    case Pooling::LastToken:
      return h.bottomRows(1).cast<double>();
  }
  return {};
}

std::vector<std::size_t> condition_rows(const ActivationRun& run, Condition condition) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < run.size(); ++i)
    if (run.info(i).condition == condition) rows.push_back(i);
  return rows;
}

Eigen::MatrixXd layer_matrix(const ActivationRun& run, int layer, Pooling pooling,
                             TokenPolicy policy, std::span<const std::size_t> rows) {
  if (layer < 1 || layer > run.num_layers)
    throw ConfigError("layer " + std::to_string(layer) + " outside 1.." +
                      std::to_string(run.num_layers));
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(run.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rows = all;
  }
  int tokens = -1;
  Eigen::Index width = run.hidden_dim;
  if (pooling == Pooling::Flatten) {
    int t_min = run.sentences[rows[0]].token_count;
    int t_max = t_min;
    for (auto r : rows) {
      t_min = std::min(t_min, run.sentences[r].token_count);
      t_max = std::max(t_max, run.sentences[r].token_count);
    }
    if (t_min != t_max && policy == TokenPolicy::Strict)
      throw DegenerateError("flatten pooling needs a common token count (found " +
                            std::to_string(t_min) + ".." + std::to_string(t_max) +
                            "); use truncate_to_min or mean_tokens");
    tokens = t_min;
    width = Eigen::Index(t_min) * run.hidden_dim;
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) =
        pool_tensor(run.sentences[rows[i]].layers[layer - 1], pooling, tokens);
  return m;
}

}  // namespace probescope
