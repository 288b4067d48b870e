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

#include <regex>

#include "probescope/error.hpp"
#include "probescope/pipeline.hpp"
#include "probescope/stimulus.hpp"
#include "test_util.hpp"

using namespace probescope;
using nlohmann::json;
using testing::TempDir;

namespace {

json small_config() {
  return json::parse(R"({
    "activations": {"synthetic": {"num_layers": 10, "hidden_dim": 8, "num_pairs": 60,
                                  "token_count": 2, "signal_layers": [3, 9], "effect_size": 3}},
    "seed": 5,
    "num_permutations": 200
  })");
}

PipelineConfig config_in(const std::filesystem::path& out, json doc = small_config()) {
  PipelineConfig c = config_from_json(doc);
  c.output_dir = out;
  return c;
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file())
      files[std::filesystem::relative(e.path(), dir).generic_string()] = testing::slurp(e.path());
  return files;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing") {
  const PipelineConfig c = config_from_json(small_config());
  CHECK(c.seed == 5);
  REQUIRE(c.synthetic.has_value());
  CHECK(c.synthetic->seed == 5);  // inherited
  CHECK(c.num_permutations == 200);
  CHECK(c.permutation_unit == PermutationUnit::Layer);

  json doc = small_config();
  doc.erase("seed");
  CHECK(config_from_json(doc, 77).seed == 77);
  CHECK(config_from_json(doc, 77).synthetic->seed == 77);
  CHECK(config_from_json(doc).seed == 0);
  doc["activations"]["synthetic"]["seed"] = 3;
  CHECK(config_from_json(doc, 77).synthetic->seed == 3);

  json bad = small_config();
  bad["lamda"] = 2;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = small_config();
  bad["activations"]["run_dir"] = "x";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = small_config();
  bad["corpus"] = {{"lexicon", "lex.json"}};
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = small_config();
  bad["folds"] = "five";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = small_config();
  bad["alpha"] = 1.5;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::object()), ConfigError);

  json rel = json::parse(R"({"activations": {"run_dir": "runs/a"}, "output_dir": "out"})");
  const PipelineConfig r = config_from_json(rel, std::nullopt, "/data/cfg");
  CHECK(r.run_dir->generic_string() == "/data/cfg/runs/a");
  CHECK(r.output_dir.generic_string() == "/data/cfg/out");
}

TEST_CASE("config hash covers analysis settings only") {
  PipelineConfig a = config_from_json(small_config());
  PipelineConfig b = a;
  b.output_dir = "/elsewhere";
  b.jobs = 4;
  b.resume = true;
  CHECK(config_hash(a) == config_hash(b));
  b.lambda = 2.0;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
  // The canonical form parses back to the same config.
  CHECK(config_hash(config_from_json(canonical_json(a))) == config_hash(a));
}

TEST_CASE("provenance comment") {
  const std::string line = provenance_comment({"00ff00ff00ff00ff", 42});
  CHECK(line == "# probescope 0.1.0 config_hash=00ff00ff00ff00ff seed=42");
  const auto p = parse_provenance_comment("<!-- " + line + " -->");
  REQUIRE(p.has_value());
  CHECK(p->config_hash == "00ff00ff00ff00ff");
  CHECK(p->seed == 42);
  CHECK_FALSE(parse_provenance_comment("# nothing here").has_value());
}

TEST_CASE("bundle contents and provenance") {
  TempDir dir("bundle");
  const PipelineResult r = run_pipeline(config_in(dir.path()));
  for (const char* f : {"config.json", "provenance.json", "corpus.csv", "decoding_folds.csv",
                        "decoding_summary.csv", "clusters.json", "clusters.csv", "pr.csv",
                        "auc_by_layer.svg", "pr_by_layer.svg"})
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  CHECK_FALSE(std::filesystem::exists(dir / ".staging"));
  CHECK_FALSE(std::filesystem::exists(dir / "quarantine"));
  CHECK(r.decoding.size() == 10);
  CHECK(r.pr.diff.size() == 10);

  const std::string header = provenance_comment({r.config_hash, 5});
  for (const char* f : {"corpus.csv", "decoding_folds.csv", "decoding_summary.csv", "clusters.csv", "pr.csv"})
    CHECK(testing::slurp(dir / f).rfind(header + "\n", 0) == 0);
  CHECK(testing::slurp(dir / "auc_by_layer.svg").find(header) != std::string::npos);
  CHECK(json::parse(testing::slurp(dir / "clusters.json"))["provenance"]["config_hash"] == r.config_hash);
  CHECK(verify_bundle(dir.path()).empty());

  const Bundle b = load_bundle(dir.path());
  CHECK(b.summary.size() == 10);
  CHECK(b.summary[4].mean_auc == r.decoding[4].mean_auc);
  CHECK(b.pr[2].diff == r.pr.diff(2));
  CHECK(bundle_report(b).find("peak mean AUC") != std::string::npos);

  // A strong 7-layer band: one cluster covering it.
  REQUIRE(r.clusters.clusters.size() >= 1);
  bool found = false;
  for (const auto& c : r.clusters.clusters)
    found |= c.cluster.first_layer <= 3 && c.cluster.last_layer >= 9;
  CHECK(found);
}

TEST_CASE("tampering is detected") {
  TempDir dir("tamper");
  run_pipeline(config_in(dir.path()));

  SUBCASE("edited table") {
    std::string s = testing::slurp(dir / "decoding_summary.csv");
    s[s.size() - 3] = s[s.size() - 3] == '1' ? '2' : '1';
    testing::spit(dir / "decoding_summary.csv", s);
    const auto problems = verify_bundle(dir.path());
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("decoding_summary.csv") != std::string::npos);
  }
  SUBCASE("edited config") {
    auto cfg = json::parse(testing::slurp(dir / "config.json"));
    cfg["config"]["lambda"] = 10.0;
    testing::spit(dir / "config.json", cfg.dump(2));
    CHECK(verify_bundle(dir.path()).size() >= 8);
  }
  SUBCASE("stripped header") {
    std::string s = testing::slurp(dir / "pr.csv");
    testing::spit(dir / "pr.csv", s.substr(s.find('\n') + 1));
    CHECK(verify_bundle(dir.path()).size() == 2);  // no header, and fingerprint
  }
}

TEST_CASE("identical configs give byte identical bundles") {
  TempDir a("det-a"), b("det-b");
  run_pipeline(config_in(a.path()));
  PipelineConfig c = config_in(b.path());
  c.jobs = 3;
  run_pipeline(c);
  CHECK(snapshot(a.path()) == snapshot(b.path()));

  // Rerunning into the same directory replaces it with the same bytes.
  const auto before = snapshot(a.path());
  run_pipeline(config_in(a.path()));
  CHECK(snapshot(a.path()) == before);
}

TEST_CASE("resume reuses cached stages") {
  TempDir dir("resume");
  PipelineConfig c = config_in(dir.path());
  const PipelineResult first = run_pipeline(c);
  CHECK_FALSE(first.decoding_from_cache);
  const auto before = snapshot(dir.path());

  std::filesystem::remove(dir / "decoding_summary.csv");
  std::filesystem::remove(dir / "clusters.json");
  std::filesystem::remove(dir / "auc_by_layer.svg");
  c.resume = true;
  const PipelineResult second = run_pipeline(c);
  CHECK(second.decoding_from_cache);
  CHECK(second.pr_from_cache);
  CHECK(snapshot(dir.path()) == before);

  // A downstream-only change keeps the decoding cache but not the outputs.
  c.alpha = 0.05;
  const PipelineResult third = run_pipeline(c);
  CHECK(third.decoding_from_cache);
  CHECK(third.config_hash != first.config_hash);
  CHECK(verify_bundle(dir.path()).empty());

  // An upstream change misses the cache.
  c.lambda = 0.5;
  CHECK_FALSE(run_pipeline(c).decoding_from_cache);
}

TEST_CASE("failures are stage tagged and quarantined") {
  TempDir dir("fail");
  SUBCASE("corrupt run directory") {
    write_run(testing::gaussian_run(20, 2, 3, 1, 1), dir / "run");
    std::string bin = testing::slurp(dir / "run" / "activations.bin");
    bin[1] = 'Z';
    testing::spit(dir / "run" / "activations.bin", bin);
    PipelineConfig c = config_from_json({{"activations", {{"run_dir", (dir / "run").string()}}}});
    c.output_dir = dir / "out";
    try {
      run_pipeline(c);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "activations");
      CHECK(e.exit_code() == 3);
      CHECK(std::string(e.what()).rfind("[activations]", 0) == 0);
    }
    CHECK(std::filesystem::exists(dir / "out" / "quarantine" / "ERROR.txt"));
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "config.json"));
  }
  SUBCASE("degenerate layer") {
    ActivationRun run = testing::gaussian_run(20, 2, 3, 1, 1);
    for (auto& s : run.sentences) s.layers[1].setConstant(1.0f);
    write_run(run, dir / "run");
    PipelineConfig c = config_from_json({{"activations", {{"run_dir", (dir / "run").string()}}}});
    c.output_dir = dir / "out";
    std::filesystem::create_directories(dir / "out");
    testing::spit(dir / "out" / "pr.csv", "previous\n");
    try {
      run_pipeline(c);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "decoding");
      CHECK(e.exit_code() == 4);
    }
    CHECK(testing::slurp(dir / "out" / "quarantine" / "ERROR.txt").find("IQR") != std::string::npos);
    CHECK(testing::slurp(dir / "out" / "pr.csv") == "previous\n");
  }
}

TEST_CASE("run directory checked against a corpus manifest") {
  TempDir dir("corpus");
  ActivationRun run = testing::gaussian_run(40, 2, 3, 1, 2);
  write_run(run, dir / "run");
  write_manifest_csv(run.manifest, dir / "manifest.csv");
  json doc = {{"activations", {{"run_dir", "run"}}}, {"corpus", {{"manifest", "manifest.csv"}}}};
  PipelineConfig c = config_from_json(doc, std::nullopt, dir.path());
  c.output_dir = dir / "out";
  CHECK_NOTHROW(run_pipeline(c));

  CorpusManifest other = run.manifest;
  other.sentences[3].text = "something else";
  write_manifest_csv(other, dir / "manifest.csv");
  try {
    run_pipeline(c);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.kind() == ErrorKind::DataFormat);
    CHECK(std::string(e.what()).find("sentence_id 3") != std::string::npos);
  }
}

TEST_CASE("feature export and subset sweep") {
  TempDir dir("export");
  json doc = small_config();
  doc["export_features"] = true;
  doc["subset_sweep_layers"] = {5};
  const PipelineResult r = run_pipeline(config_in(dir.path(), doc));
  CHECK(std::filesystem::exists(dir / "features" / "layer_01.csv"));
  CHECK(std::filesystem::exists(dir / "features" / "layer_10.json"));
  const std::string sweep = testing::slurp(dir / "subset_sweep.csv");
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 2 + 31);
  CHECK(verify_bundle(dir.path()).empty());
  (void)r;
}

TEST_CASE("auc plot shading") {
  std::vector<SummaryRow> rows;
  for (int l = 1; l <= 32; ++l) rows.push_back({l, l >= 18 && l <= 30 ? 0.9 : 0.5, 0.01});
  const Provenance prov{"0123456789abcdef", 1};
  const std::string svg = auc_svg(rows, {{18, 30, 400.0, 0.001, true}, {5, 5, -3.0, 0.9, false}}, prov);
  const std::regex rect("<rect class=\"cluster\" data-layer-start=\"(\\d+)\" data-layer-end=\"(\\d+)\"");
  auto it = std::sregex_iterator(svg.begin(), svg.end(), rect);
  REQUIRE(std::distance(it, std::sregex_iterator()) == 1);
  CHECK((*it)[1] == "18");
  CHECK((*it)[2] == "30");
  CHECK(svg.find("no significant cluster") == std::string::npos);
  CHECK(svg.find("class=\"chance\"") != std::string::npos);
  CHECK(svg.find("class=\"sem-band\"") != std::string::npos);
  CHECK(svg.find("config_hash=0123456789abcdef") != std::string::npos);

  // The shaded rectangle is exactly layers 18..30 on the plot's x axis.
  const std::regex geom("data-layer-end=\"30\" x=\"([0-9.]+)\" y=\"[0-9.]+\" width=\"([0-9.]+)\"");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, geom));
  const double px_per_layer = (720.0 - 64.0 - 24.0) / 32.0;
  CHECK(std::stod(m[1]) == doctest::Approx(64.0 + 17.0 * px_per_layer).epsilon(1e-3));
  CHECK(std::stod(m[2]) == doctest::Approx(13.0 * px_per_layer).epsilon(1e-3));

  const std::string empty = auc_svg(rows, {}, prov);
  CHECK(empty.find("no significant cluster") != std::string::npos);
  CHECK(empty.find("class=\"cluster\"") == std::string::npos);
}

TEST_CASE("pr plot with identical curves draws a flat difference") {
  std::vector<PRRow> rows;
  for (int l = 1; l <= 8; ++l) rows.push_back({l, 3.0 + 0.1 * l, 3.0 + 0.1 * l, 0.0});
  const std::string svg = pr_svg(rows, {"0123456789abcdef", 1});
  std::smatch zero, diff;
  REQUIRE(std::regex_search(svg, zero, std::regex("class=\"zero\" x1=\"[0-9.]+\" y1=\"([0-9.]+)\"")));
  REQUIRE(std::regex_search(svg, diff, std::regex("class=\"pr-diff\" points=\"([^\"]+)\"")));
  const std::string points = diff[1];
  const std::regex pt("[0-9.]+,([0-9.]+)");
  int n = 0;
  for (auto i = std::sregex_iterator(points.begin(), points.end(), pt); i != std::sregex_iterator(); ++i, ++n)
    CHECK((*i)[1] == zero[1]);
  CHECK(n == 8);
  CHECK(svg.find("pr-control") != std::string::npos);
  CHECK(svg.find("pr-violation") != std::string::npos);
}

}  // TEST_SUITE
