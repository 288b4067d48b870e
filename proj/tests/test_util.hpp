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

#ifndef PROBESCOPE_TESTS_TEST_UTIL_HPP_
#define PROBESCOPE_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "probescope/activation_io.hpp"
#include "probescope/random.hpp"

namespace probescope::testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("probescope-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void spit(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// Small run with Gaussian entries; sentence i belongs to pair i/2 and
// alternates control/violation.
inline ActivationRun gaussian_run(int sentences, int layers, int dim, int tokens,
                                  std::uint64_t seed) {
  ActivationRun run;
  run.model_name = "test";
  run.extraction_point = "test";
  run.num_layers = layers;
  run.hidden_dim = dim;
  Rng rng(seed);
  for (int i = 0; i < sentences; ++i) {
    Sentence s;
    s.sentence_id = i;
    s.pair_id = i / 2;
    s.condition = i % 2 ? Condition::Violation : Condition::Control;
    s.text = "sentence " + std::to_string(i);
    run.manifest.sentences.push_back(s);
    (i % 2 ? run.manifest.violation_count : run.manifest.control_count)++;
    SentenceActivations a;
    a.sentence_id = i;
    a.token_count = tokens;
    for (int l = 0; l < layers; ++l) {
      LayerTensor h(tokens, dim);
      for (int t = 0; t < tokens; ++t)
        for (int j = 0; j < dim; ++j) h(t, j) = static_cast<float>(rng.normal());
      a.layers.push_back(std::move(h));
    }
    run.sentences.push_back(std::move(a));
  }
  return run;
}

}  // namespace probescope::testing

#endif  // PROBESCOPE_TESTS_TEST_UTIL_HPP_
