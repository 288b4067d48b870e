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

#ifndef PROBESCOPE_STIMULUS_HPP_
#define PROBESCOPE_STIMULUS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace probescope {

enum class Condition : std::uint8_t { Control = 0, Violation = 1 };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view text);

/// One row of the lexicon. `profession` is the surface subject phrase as it
/// appears in the sentence ("baker", "painters"); verb agreement is up to the
/// lexicon author.
struct LexiconEntry {
  std::string profession;
  std::string verb;
  std::string expected_object;
  std::string violation_object;
};

struct Lexicon {
  std::string determiner = "The";
  std::vector<std::string> locations;
  std::vector<LexiconEntry> entries;
};

struct Sentence {
  std::int64_t sentence_id = 0;
  std::string text;
  Condition condition = Condition::Control;
  std::int64_t pair_id = 0;
};

struct StimulusPair {
  std::int64_t pair_id = 0;
  Sentence plausible;
  Sentence violation;
};

/// Flat, id-ordered view of a corpus. Shared by the activation manifest.
struct CorpusManifest {
  std::vector<Sentence> sentences;
  std::size_t control_count = 0;
  std::size_t violation_count = 0;
};

/// Validates entry/location invariants; throws ConfigError naming the entry index.
void validate_lexicon(const Lexicon& lexicon);

Lexicon parse_lexicon(std::string_view json_text);
Lexicon load_lexicon(const std::filesystem::path& path);

/// "The [subject] [location] [verb] [object]."
std::string render_sentence(const Lexicon& lexicon, const LexiconEntry& entry,
                            std::size_t location_index, bool violation);

/// Cross product of entries and locations, entry-major, pair ids from 0.
std::vector<StimulusPair> generate_corpus(const Lexicon& lexicon);

/// Sentence ids are 2*pair_id (control) and 2*pair_id+1 (violation).
CorpusManifest corpus_manifest(const std::vector<StimulusPair>& pairs);

/// Rebuilds condition counts from a sentence list and checks id uniqueness.
CorpusManifest manifest_from_sentences(std::vector<Sentence> sentences);

/// CSV with header `sentence_id,pair_id,condition,text`.
void write_manifest_csv(const CorpusManifest& manifest, std::ostream& out);
void write_manifest_csv(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest read_manifest_csv(std::istream& in);
CorpusManifest read_manifest_csv(const std::filesystem::path& path);

/// Whitespace tokenization used by the minimal-pair invariant checks.
std::vector<std::string> split_words(std::string_view text);

}  // namespace probescope

#endif  // PROBESCOPE_STIMULUS_HPP_
