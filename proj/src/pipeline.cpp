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

#include "probescope/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "probescope/csv.hpp"
#include "probescope/parallel.hpp"
#include "probescope/stimulus.hpp"
#include "probescope/subset_sweep.hpp"

namespace probescope {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void validate(const PipelineConfig& c) {
  if (c.synthetic.has_value() == c.run_dir.has_value())
    throw ConfigError("config: exactly one activation source (synthetic or run_dir) is required");
  if (c.lexicon && c.corpus_manifest)
    throw ConfigError("config: corpus takes either a lexicon or a manifest, not both");
  if (c.synthetic && (c.lexicon || c.corpus_manifest))
    throw ConfigError("config: a corpus source only applies to run_dir activations");
  if (c.synthetic) validate(*c.synthetic);
  if (c.folds < 2) throw ConfigError("config: folds must be >= 2");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda))
    throw ConfigError("config: lambda must be finite and >= 0");
  if (c.features.empty()) throw ConfigError("config: features must be non-empty");
  if (!(c.threshold_t > 0.0)) throw ConfigError("config: threshold_t must be > 0");
  if (c.num_permutations < 1) throw ConfigError("config: num_permutations must be >= 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("config: alpha must lie in (0, 1)");
  if (c.jobs < 1) throw ConfigError("config: jobs must be >= 1");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

}  // namespace

PipelineConfig config_from_json(const json& doc, std::optional<std::uint64_t> seed_fallback,
                                const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  PipelineConfig c;
  if (doc.contains("seed")) c.seed = get_as<std::uint64_t>(doc["seed"], "seed");
  else if (seed_fallback) c.seed = *seed_fallback;

  for (const auto& [key, v] : doc.items()) {
    if (key == "seed") continue;
    if (key == "corpus") {
      if (!v.is_object()) throw ConfigError("config: 'corpus' must be an object");
      for (const auto& [ck, cv] : v.items()) {
        if (ck == "lexicon") c.lexicon = resolve(base_dir, get_as<std::string>(cv, "corpus.lexicon"));
        else if (ck == "manifest")
          c.corpus_manifest = resolve(base_dir, get_as<std::string>(cv, "corpus.manifest"));
        else throw ConfigError("config: unknown key 'corpus." + ck + "'");
      }
    } else if (key == "activations") {
      if (!v.is_object()) throw ConfigError("config: 'activations' must be an object");
      for (const auto& [ak, av] : v.items()) {
        if (ak == "synthetic") {
          json spec = av;
          if (spec.is_object() && !spec.contains("seed")) spec["seed"] = c.seed;
          c.synthetic = plant_spec_from_json(spec);
        } else if (ak == "run_dir") {
          c.run_dir = resolve(base_dir, get_as<std::string>(av, "activations.run_dir"));
        } else {
          throw ConfigError("config: unknown key 'activations." + ak + "'");
        }
      }
    } else if (key == "folds") c.folds = get_as<int>(v, key);
    else if (key == "lambda") c.lambda = get_as<double>(v, key);
    else if (key == "group_pairs") c.group_pairs = get_as<bool>(v, key);
    else if (key == "features") c.features = FeatureSubset::parse(get_as<std::vector<std::string>>(v, key));
    else if (key == "feature_pooling") c.feature_options.pooling = parse_pooling(get_as<std::string>(v, key));
    else if (key == "normalize_mode") c.feature_options.normalize = parse_normalize_mode(get_as<std::string>(v, key));
    else if (key == "token_policy") {
      const auto policy = parse_token_policy(get_as<std::string>(v, key));
      c.feature_options.token_policy = policy;
      c.pr_options.token_policy = policy;
    } else if (key == "pr_pooling") c.pr_options.pooling = parse_pooling(get_as<std::string>(v, key));
    else if (key == "pr_centering") c.pr_options.centering = parse_centering(get_as<std::string>(v, key));
    else if (key == "threshold_t") c.threshold_t = get_as<double>(v, key);
    else if (key == "num_permutations") c.num_permutations = get_as<int>(v, key);
    else if (key == "alpha") c.alpha = get_as<double>(v, key);
    else if (key == "permutation_unit") c.permutation_unit = parse_permutation_unit(get_as<std::string>(v, key));
    else if (key == "export_features") c.export_features = get_as<bool>(v, key);
    else if (key == "subset_sweep_layers") c.subset_sweep_layers = get_as<std::vector<int>>(v, key);
    else if (key == "output_dir") c.output_dir = resolve(base_dir, get_as<std::string>(v, key));
    else if (key == "jobs") c.jobs = get_as<unsigned>(v, key);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

json canonical_json(const PipelineConfig& c) {
  json activations;
  if (c.synthetic) activations["synthetic"] = to_json(*c.synthetic);
  if (c.run_dir) activations["run_dir"] = c.run_dir->generic_string();
  json doc = {{"activations", activations},
              {"folds", c.folds},
              {"lambda", c.lambda},
              {"group_pairs", c.group_pairs},
              {"features", [&] {
                 std::vector<std::string> names;
                 for (auto m : c.features.members()) names.emplace_back(to_string(m));
                 return names;
               }()},
              {"feature_pooling", to_string(c.feature_options.pooling)},
              {"normalize_mode", to_string(c.feature_options.normalize)},
              {"token_policy", to_string(c.feature_options.token_policy)},
              {"pr_pooling", to_string(c.pr_options.pooling)},
              {"pr_centering", to_string(c.pr_options.centering)},
              {"threshold_t", c.threshold_t},
              {"num_permutations", c.num_permutations},
              {"alpha", c.alpha},
              {"permutation_unit", to_string(c.permutation_unit)},
              {"seed", c.seed},
              {"export_features", c.export_features},
              {"subset_sweep_layers", c.subset_sweep_layers}};
  if (c.lexicon) doc["corpus"] = {{"lexicon", c.lexicon->generic_string()}};
  if (c.corpus_manifest) doc["corpus"] = {{"manifest", c.corpus_manifest->generic_string()}};
  return doc;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[i] = digits[value & 0xf];
  return out;
}

std::string config_hash(const json& canonical) { return hex64(fnv1a64(canonical.dump())); }
std::string config_hash(const PipelineConfig& config) { return config_hash(canonical_json(config)); }

// ---------------------------------------------------------------------------
// Provenance headers
// ---------------------------------------------------------------------------

std::string provenance_comment(const Provenance& p) {
  return std::string("# probescope ") + kToolkitVersion + " config_hash=" + p.config_hash +
         " seed=" + std::to_string(p.seed);
}

std::optional<Provenance> parse_provenance_comment(std::string_view line) {
  const auto h = line.find("config_hash=");
  const auto s = line.find(" seed=");
  if (h == std::string_view::npos || s == std::string_view::npos || s < h) return std::nullopt;
  Provenance p;
  p.config_hash = std::string(line.substr(h + 12, s - (h + 12)));
  auto rest = line.substr(s + 6);
  const auto end = rest.find_first_not_of("0123456789");
  if (end != std::string_view::npos) rest = rest.substr(0, end);
  if (rest.empty()) return std::nullopt;
  p.seed = static_cast<std::uint64_t>(std::stoull(std::string(rest)));
  return p;
}

namespace {

json provenance_json(const Provenance& p) {
  return {{"config_hash", p.config_hash}, {"seed", p.seed}, {"toolkit", kToolkitVersion}};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.filename().string() + ": " + e.what());
  }
}

template <typename F>
auto run_stage(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

std::vector<std::string> list_files(const fs::path& root) {
  std::vector<std::string> files;
  if (!fs::exists(root)) return files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), root).generic_string());
  std::sort(files.begin(), files.end());
  return files;
}

// Stage cache keys cover only the inputs that stage depends on.
std::string decoding_key(const json& canonical) {
  json k = {{"activations", canonical["activations"]},
            {"folds", canonical["folds"]},
            {"lambda", canonical["lambda"]},
            {"group_pairs", canonical["group_pairs"]},
            {"features", canonical["features"]},
            {"feature_pooling", canonical["feature_pooling"]},
            {"normalize_mode", canonical["normalize_mode"]},
            {"token_policy", canonical["token_policy"]},
            {"seed", canonical["seed"]}};
  return config_hash(k);
}

std::string pr_key(const json& canonical) {
  json k = {{"activations", canonical["activations"]},
            {"pr_pooling", canonical["pr_pooling"]},
            {"pr_centering", canonical["pr_centering"]},
            {"token_policy", canonical["token_policy"]}};
  return config_hash(k);
}

std::optional<json> load_cache(const fs::path& path, const std::string& key) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    json doc = json::parse(read_file(path));
    if (doc.value("key", std::string{}) != key) return std::nullopt;
    return doc;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_corpus(const ActivationRun& run, const CorpusManifest& corpus) {
  std::map<std::int64_t, const Sentence*> by_id;
  for (const auto& s : corpus.sentences) by_id[s.sentence_id] = &s;
  for (const auto& s : run.manifest.sentences) {
    const auto it = by_id.find(s.sentence_id);
    if (it == by_id.end())
      throw FormatError("run sentence_id " + std::to_string(s.sentence_id) + " is not in the corpus");
    if (it->second->text != s.text || it->second->condition != s.condition ||
        it->second->pair_id != s.pair_id)
      throw FormatError("run sentence_id " + std::to_string(s.sentence_id) +
                        " disagrees with the corpus (text, condition or pair_id)");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const PipelineConfig& config) {
  validate(config);
  const json canonical = canonical_json(config);
  PipelineResult result;
  result.config_hash = config_hash(canonical);
  const Provenance prov{result.config_hash, config.seed};
  const std::string header = provenance_comment(prov) + "\n";

  const fs::path out = config.output_dir;
  const fs::path staging = out / ".staging";
  const fs::path cache_dir = out / "cache";
  fs::create_directories(out);
  fs::remove_all(staging);
  fs::create_directories(staging);

  try {
    std::optional<CorpusManifest> corpus = run_stage("corpus", [&]() -> std::optional<CorpusManifest> {
      if (config.lexicon) return corpus_manifest(generate_corpus(load_lexicon(*config.lexicon)));
      if (config.corpus_manifest) return read_manifest_csv(*config.corpus_manifest);
      return std::nullopt;
    });

    std::optional<ActivationRun> run_storage;
    auto run = [&]() -> const ActivationRun& {
      if (!run_storage) {
        run_storage = run_stage("activations", [&] {
          ActivationRun r = config.synthetic ? generate_synthetic(*config.synthetic, config.jobs)
                                             : read_run(*config.run_dir);
          if (corpus) check_corpus(r, *corpus);
          return r;
        });
      }
      return *run_storage;
    };

    const CVSpec cv{config.folds, config.seed, true, config.group_pairs};

    // Decoding.
    const std::string dkey = decoding_key(canonical);
    const fs::path dcache = cache_dir / ("decoding-" + dkey + ".json");
    if (auto cached = config.resume ? load_cache(dcache, dkey) : std::nullopt) {
      for (const auto& layer : (*cached)["layers"]) {
        DecodingResult r = summarize_folds(layer["layer"].get<int>(),
                                           from_vector(layer["fold_aucs"].get<std::vector<double>>()));
        r.nonconverged_folds = layer["nonconverged_folds"].get<int>();
        result.decoding.push_back(std::move(r));
      }
      result.decoding_from_cache = true;
    } else {
      result.decoding = run_stage("decoding", [&] {
        const ActivationRun& r = run();
        std::vector<DecodingResult> decoded(static_cast<std::size_t>(r.num_layers));
        parallel_for(decoded.size(), config.jobs, [&](std::size_t i) {
          const FeatureTable table =
              build_feature_table(r, static_cast<int>(i) + 1, config.feature_options);
          decoded[i] = decode_layer(table, config.features, cv, config.lambda);
        });
        return decoded;
      });
    }
    json dcache_doc = {{"key", dkey}, {"layers", json::array()}};
    for (const auto& d : result.decoding)
      dcache_doc["layers"].push_back({{"layer", d.layer},
                                      {"fold_aucs", to_vector(d.fold_aucs)},
                                      {"nonconverged_folds", d.nonconverged_folds}});
    write_file(staging / "cache" / dcache.filename(), dcache_doc.dump(1) + "\n");

    if (config.export_features || !config.subset_sweep_layers.empty()) {
      run_stage("features", [&] {
        const ActivationRun& r = run();
        if (config.export_features) {
          const int width = r.num_layers >= 100 ? 3 : 2;
          for (int l = 1; l <= r.num_layers; ++l) {
            const FeatureTable table = build_feature_table(r, l, config.feature_options);
            std::string name = std::to_string(l);
            name.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(name.size()))), '0');
            const fs::path base = staging / "features" / ("layer_" + name);
            fs::create_directories(base.parent_path());
            write_feature_csv(table, base.string() + ".csv", provenance_comment(prov));
            json sidecar = {{"provenance", provenance_json(prov)},
                            {"layer", l},
                            {"normalization", normalization_json(table.normalization)}};
            write_file(base.string() + ".json", sidecar.dump(2) + "\n");
          }
        }
        if (!config.subset_sweep_layers.empty()) {
          std::ostringstream sweep;
          sweep << header << "layer,subset,mean_auc,sem\n";
          for (int l : config.subset_sweep_layers) {
            const auto rows = subset_sweep(r, l, cv, config.feature_options, config.lambda);
            for (const auto& row : rows)
              sweep << l << ',' << row.subset.label() << ',' << csv::format_double(row.result.mean_auc)
                    << ',' << csv::format_double(row.result.sem) << '\n';
          }
          write_file(staging / "subset_sweep.csv", sweep.str());
        }
        return 0;
      });
    }

    // Cluster statistics.
    result.clusters = run_stage("cluster-stats", [&] {
      LayerTrace trace;
      trace.fold_scores.resize(config.folds, static_cast<Eigen::Index>(result.decoding.size()));
      for (std::size_t l = 0; l < result.decoding.size(); ++l)
        trace.fold_scores.col(static_cast<Eigen::Index>(l)) = result.decoding[l].fold_aucs;
      PermutationOptions opts;
      opts.threshold = config.threshold_t;
      opts.num_permutations = config.num_permutations;
      opts.alpha = config.alpha;
      opts.seed = config.seed;
      opts.unit = config.permutation_unit;
      return permutation_test(trace, opts);
    });

    // Participation ratio.
    const std::string pkey = pr_key(canonical);
    const fs::path pcache = cache_dir / ("pr-" + pkey + ".json");
    if (auto cached = config.resume ? load_cache(pcache, pkey) : std::nullopt) {
      result.pr.control.condition = Condition::Control;
      result.pr.violation.condition = Condition::Violation;
      result.pr.control.pooling = result.pr.violation.pooling = config.pr_options.pooling;
      result.pr.control.pr_by_layer = from_vector((*cached)["control"].get<std::vector<double>>());
      result.pr.violation.pr_by_layer = from_vector((*cached)["violation"].get<std::vector<double>>());
      const auto ne_c = (*cached)["n_effective_control"].get<std::vector<int>>();
      const auto ne_v = (*cached)["n_effective_violation"].get<std::vector<int>>();
      result.pr.control.n_effective = Eigen::Map<const Eigen::VectorXi>(ne_c.data(), static_cast<Eigen::Index>(ne_c.size()));
      result.pr.violation.n_effective = Eigen::Map<const Eigen::VectorXi>(ne_v.data(), static_cast<Eigen::Index>(ne_v.size()));
      result.pr.diff = result.pr.violation.pr_by_layer - result.pr.control.pr_by_layer;
      result.pr_from_cache = true;
    } else {
      result.pr = run_stage("dimensionality",
                            [&] { return pr_difference_trace(run(), config.pr_options, config.jobs); });
    }
    {
      auto ivec = [](const Eigen::VectorXi& v) { return std::vector<int>(v.data(), v.data() + v.size()); };
      json pcache_doc = {{"key", pkey},
                         {"control", to_vector(result.pr.control.pr_by_layer)},
                         {"violation", to_vector(result.pr.violation.pr_by_layer)},
                         {"n_effective_control", ivec(result.pr.control.n_effective)},
                         {"n_effective_violation", ivec(result.pr.violation.n_effective)}};
      write_file(staging / "cache" / pcache.filename(), pcache_doc.dump(1) + "\n");
    }

    run_stage("write", [&] {
      if (run_storage) {
        std::ostringstream corpus_csv;
        corpus_csv << header;
        write_manifest_csv(run_storage->manifest, corpus_csv);
        write_file(staging / "corpus.csv", corpus_csv.str());
      } else if (fs::exists(out / "corpus.csv")) {
        // Both stages came from cache; the previous corpus is still ours
        // only if its header carries this config hash.
        const std::string previous = read_file(out / "corpus.csv");
        const auto p = parse_provenance_comment(previous.substr(0, previous.find('\n')));
        if (p && p->config_hash == prov.config_hash) write_file(staging / "corpus.csv", previous);
      }
      if (!fs::exists(staging / "corpus.csv")) {
        std::ostringstream corpus_csv;
        corpus_csv << header;
        write_manifest_csv(run().manifest, corpus_csv);
        write_file(staging / "corpus.csv", corpus_csv.str());
      }
      std::ostringstream folds_csv;
      std::ostringstream summary_csv;
      folds_csv << header << "layer,fold,auc\n";
      summary_csv << header << "layer,mean_auc,sem\n";
      for (const auto& d : result.decoding) {
        for (Eigen::Index f = 0; f < d.fold_aucs.size(); ++f)
          folds_csv << d.layer << ',' << f << ',' << csv::format_double(d.fold_aucs(f)) << '\n';
        summary_csv << d.layer << ',' << csv::format_double(d.mean_auc) << ','
                    << csv::format_double(d.sem) << '\n';
      }
      write_file(staging / "decoding_folds.csv", folds_csv.str());
      write_file(staging / "decoding_summary.csv", summary_csv.str());

      json clusters = {{"provenance", provenance_json(prov)}, {"report", to_json(result.clusters)}};
      write_file(staging / "clusters.json", clusters.dump(2) + "\n");
      write_file(staging / "clusters.csv", header + cluster_csv(result.clusters));
      write_file(staging / "pr.csv", header + pr_csv(result.pr));

      json cfg = {{"provenance", provenance_json(prov)}, {"config", canonical}};
      write_file(staging / "config.json", cfg.dump(2) + "\n");
      return 0;
    });

    run_stage("plots", [&] {
      render_plots(staging);
      return 0;
    });

    // Provenance record last, so it can fingerprint every other file.
    json files = json::object();
    for (const auto& f : list_files(staging))
      if (!f.starts_with("cache/")) files[f] = hex64(fnv1a64(read_file(staging / f)));
    json record = {{"provenance", provenance_json(prov)},
                   {"stages", {"corpus", "activations", "decoding", "cluster-stats",
                               "dimensionality", "plots"}},
                   {"files", files}};
    write_file(staging / "provenance.json", record.dump(2) + "\n");
  } catch (...) {
    const fs::path quarantine = out / "quarantine";
    std::error_code ec;
    fs::remove_all(quarantine, ec);
    fs::rename(staging, quarantine, ec);
    try {
      throw;
    } catch (const std::exception& e) {
      write_file(quarantine / "ERROR.txt", std::string(e.what()) + "\n");
    } catch (...) {
    }
    throw;
  }

  result.files = list_files(staging);
  // Drop files from an earlier bundle so nothing stale survives next to us.
  for (const auto& f : list_files(out)) {
    if (f.starts_with(".staging/") || f.starts_with("cache/")) continue;
    fs::remove(out / f);
  }
  for (const auto& f : result.files) {
    const fs::path target = out / f;
    fs::create_directories(target.parent_path());
    fs::rename(staging / f, target);
  }
  fs::remove_all(staging);
  std::error_code ec;
  fs::remove_all(out / "quarantine", ec);
  return result;
}

// ---------------------------------------------------------------------------
// Bundle reading and verification
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path,
                                                    std::string_view expected_header,
                                                    std::optional<Provenance>* provenance = nullptr) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (provenance && !saw_header) *provenance = parse_provenance_comment(line);
      continue;
    }
    if (!saw_header) {
      if (line != expected_header)
        throw FormatError(path.filename().string() + ": unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    rows.push_back(csv::split_record(line));
  }
  if (!saw_header) throw FormatError(path.filename().string() + ": missing header");
  return rows;
}

}  // namespace

Bundle load_bundle(const fs::path& dir) {
  Bundle b;
  const json cfg = parse_json_file(dir / "config.json");
  if (!cfg.contains("config") || !cfg.contains("provenance"))
    throw FormatError("config.json: missing 'config' or 'provenance'");
  b.config = cfg["config"];
  b.provenance.config_hash = cfg["provenance"].value("config_hash", std::string{});
  b.provenance.seed = cfg["provenance"].value("seed", std::uint64_t{0});

  for (const auto& r : read_csv_rows(dir / "decoding_summary.csv", "layer,mean_auc,sem")) {
    if (r.size() != 3) throw FormatError("decoding_summary.csv: malformed row");
    b.summary.push_back({static_cast<int>(csv::parse_int(r[0])), csv::parse_double(r[1]),
                         csv::parse_double(r[2])});
  }
  const json clusters = parse_json_file(dir / "clusters.json");
  try {
    for (const auto& c : clusters.at("report").at("clusters"))
      b.clusters.push_back({c.at("layer_start").get<int>(), c.at("layer_end").get<int>(),
                            c.at("stat").get<double>(), c.at("corrected_p").get<double>(),
                            c.at("significant").get<bool>()});
  } catch (const json::exception& e) {
    throw FormatError(std::string("clusters.json: ") + e.what());
  }
  for (const auto& r : read_csv_rows(dir / "pr.csv", "layer,pr_control,pr_violation,diff")) {
    if (r.size() != 4) throw FormatError("pr.csv: malformed row");
    b.pr.push_back({static_cast<int>(csv::parse_int(r[0])), csv::parse_double(r[1]),
                    csv::parse_double(r[2]), csv::parse_double(r[3])});
  }
  return b;
}

std::vector<std::string> verify_bundle(const fs::path& dir) {
  std::vector<std::string> problems;
  const json cfg = parse_json_file(dir / "config.json");
  const std::string expected = config_hash(cfg.value("config", json::object()));
  auto check = [&](const std::string& file, const std::optional<std::string>& found) {
    if (!found) problems.push_back(file + ": no provenance header");
    else if (*found != expected)
      problems.push_back(file + ": config_hash " + *found + " != " + expected);
  };

  for (const auto& f : list_files(dir)) {
    if (f.starts_with("cache/") || f.starts_with("quarantine/") || f.starts_with(".staging/")) continue;
    const std::string content = read_file(dir / f);
    if (f.ends_with(".csv") || f.ends_with(".svg")) {
      const auto pos = content.find("config_hash=");
      if (pos == std::string::npos) {
        check(f, std::nullopt);
        continue;
      }
      const auto line_start = content.rfind('\n', pos);
      const auto line_end = content.find('\n', pos);
      const auto line = content.substr(line_start == std::string::npos ? 0 : line_start + 1,
                                       line_end - (line_start == std::string::npos ? 0 : line_start + 1));
      const auto p = parse_provenance_comment(line);
      check(f, p ? std::optional<std::string>(p->config_hash) : std::nullopt);
    } else if (f.ends_with(".json")) {
      json doc;
      try {
        doc = json::parse(content);
      } catch (const json::parse_error&) {
        problems.push_back(f + ": not valid JSON");
        continue;
      }
      if (doc.contains("provenance") && doc["provenance"].contains("config_hash"))
        check(f, doc["provenance"]["config_hash"].get<std::string>());
      else
        check(f, std::nullopt);
    }
  }

  if (fs::exists(dir / "provenance.json")) {
    const json record = parse_json_file(dir / "provenance.json");
    const json listed = record.value("files", json::object());
    for (const auto& [name, hash] : listed.items()) {
      if (!fs::exists(dir / name)) {
        problems.push_back(name + ": listed in provenance.json but missing");
      } else if (hex64(fnv1a64(read_file(dir / name))) != hash.get<std::string>()) {
        problems.push_back(name + ": content fingerprint does not match provenance.json");
      }
    }
  } else {
    problems.push_back("provenance.json: missing");
  }
  return problems;
}

void render_plots(const fs::path& dir) {
  const Bundle b = load_bundle(dir);
  write_file(dir / "auc_by_layer.svg", auc_svg(b.summary, b.clusters, b.provenance));
  write_file(dir / "pr_by_layer.svg", pr_svg(b.pr, b.provenance));
}

std::string bundle_report(const Bundle& b) {
  std::ostringstream out;
  out << "config_hash " << b.provenance.config_hash << "  seed " << b.provenance.seed << "\n\n";
  out << "layer  mean_auc     sem   pr_ctrl  pr_viol     diff\n";
  for (std::size_t i = 0; i < b.summary.size(); ++i) {
    const auto& s = b.summary[i];
    out << (s.layer < 10 ? "    " : "   ") << s.layer << "  " << csv::format_fixed(s.mean_auc, 4)
        << "  " << csv::format_fixed(s.sem, 4);
    if (i < b.pr.size()) {
      out << "  " << csv::format_fixed(b.pr[i].control, 3) << "  "
          << csv::format_fixed(b.pr[i].violation, 3) << "  " << csv::format_fixed(b.pr[i].diff, 3);
    }
    out << '\n';
  }
  out << '\n';
  if (b.clusters.empty()) out << "no supra-threshold clusters\n";
  for (const auto& c : b.clusters) {
    out << "cluster layers " << c.first_layer << "-" << c.last_layer << "  stat "
        << csv::format_fixed(c.stat, 3) << "  corrected p " << csv::format_double(c.corrected_p)
        << (c.significant ? "  significant" : "") << '\n';
  }
  if (!b.summary.empty()) {
    const auto peak = std::max_element(b.summary.begin(), b.summary.end(),
                                       [](const auto& a, const auto& c) { return a.mean_auc < c.mean_auc; });
    out << "peak mean AUC " << csv::format_fixed(peak->mean_auc, 4) << " at layer " << peak->layer
        << " (SEM " << csv::format_fixed(peak->sem, 4) << ")\n";
  }
  return out.str();
}

}  // namespace probescope
