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

#include "probescope/stimulus.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "probescope/csv.hpp"
#include "probescope/error.hpp"

namespace probescope {

namespace {

bool has_space(std::string_view s) {
  return s.find_first_of(" \t\r\n") != std::string_view::npos;
}

std::string entry_label(std::size_t index) { return "entry " + std::to_string(index); }

}  // namespace

std::string_view to_string(Condition c) {
  return c == Condition::Control ? "control" : "violation";
}

Condition parse_condition(std::string_view text) {
  if (text == "control") return Condition::Control;
  if (text == "violation") return Condition::Violation;
  throw FormatError("unknown condition '" + std::string(text) + "'");
}

void validate_lexicon(const Lexicon& lexicon) {
  if (lexicon.determiner.empty() || has_space(lexicon.determiner))
    throw ConfigError("lexicon: determiner must be a single non-empty word");
  if (lexicon.locations.empty()) throw ConfigError("lexicon: locations list is empty");
  for (std::size_t i = 0; i < lexicon.locations.size(); ++i) {
    if (lexicon.locations[i].empty())
      throw ConfigError("lexicon: location " + std::to_string(i) + " is empty");
  }
  if (lexicon.entries.empty()) throw ConfigError("lexicon: entries list is empty");

  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < lexicon.entries.size(); ++i) {
    const auto& e = lexicon.entries[i];
    if (e.profession.empty() || e.verb.empty() || e.expected_object.empty() ||
        e.violation_object.empty())
      throw ConfigError("lexicon: " + entry_label(i) + " has an empty field");
    if (has_space(e.expected_object) || has_space(e.violation_object))
      throw ConfigError("lexicon: " + entry_label(i) + " objects must be single words");
    if (e.expected_object == e.violation_object)
      throw ConfigError("lexicon: " + entry_label(i) +
                        " expected_object equals violation_object");
    auto [it, inserted] = seen.emplace(std::make_pair(e.profession, e.verb), i);
    if (!inserted)
      throw ConfigError("lexicon: duplicate (profession, verb) ('" + e.profession + "', '" +
                        e.verb + "') at entries " + std::to_string(it->second) + " and " +
                        std::to_string(i));
  }
}

Lexicon parse_lexicon(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("lexicon: parse failure: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("lexicon: top level must be an object");
  for (const char* key : {"determiner", "locations", "entries"}) {
    if (!doc.contains(key)) throw ConfigError(std::string("lexicon: missing key '") + key + "'");
  }
  if (!doc["determiner"].is_string()) throw ConfigError("lexicon: 'determiner' must be a string");
  if (!doc["locations"].is_array()) throw ConfigError("lexicon: 'locations' must be an array");
  if (!doc["entries"].is_array()) throw ConfigError("lexicon: 'entries' must be an array");

  Lexicon lexicon;
  lexicon.determiner = doc["determiner"].get<std::string>();
  for (std::size_t i = 0; i < doc["locations"].size(); ++i) {
    const auto& loc = doc["locations"][i];
    if (!loc.is_string())
      throw ConfigError("lexicon: location " + std::to_string(i) + " must be a string");
    lexicon.locations.push_back(loc.get<std::string>());
  }
  const auto& entries = doc["entries"];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.is_object()) throw ConfigError("lexicon: " + entry_label(i) + " must be an object");
    auto field = [&](const char* key) {
      if (!e.contains(key) || !e[key].is_string())
        throw ConfigError("lexicon: " + entry_label(i) + " missing string field '" + key + "'");
      return e[key].get<std::string>();
    };
    lexicon.entries.push_back({field("profession"), field("verb"), field("expected_object"),
                               field("violation_object")});
  }
  validate_lexicon(lexicon);
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("lexicon: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_lexicon(buf.str());
}

std::string render_sentence(const Lexicon& lexicon, const LexiconEntry& entry,
                            std::size_t location_index, bool violation) {
  std::string text = lexicon.determiner;
  text += ' ';
  text += entry.profession;
  text += ' ';
  text += lexicon.locations.at(location_index);
  text += ' ';
  text += entry.verb;
  text += ' ';
  text += violation ? entry.violation_object : entry.expected_object;
  text += '.';
  return text;
}

std::vector<StimulusPair> generate_corpus(const Lexicon& lexicon) {
  validate_lexicon(lexicon);
  std::vector<StimulusPair> pairs;
  pairs.reserve(lexicon.entries.size() * lexicon.locations.size());
  std::int64_t pair_id = 0;
  for (const auto& entry : lexicon.entries) {
    for (std::size_t loc = 0; loc < lexicon.locations.size(); ++loc, ++pair_id) {
      StimulusPair pair;
      pair.pair_id = pair_id;
      pair.plausible = {2 * pair_id, render_sentence(lexicon, entry, loc, false),
                        Condition::Control, pair_id};
      pair.violation = {2 * pair_id + 1, render_sentence(lexicon, entry, loc, true),
                        Condition::Violation, pair_id};
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

CorpusManifest corpus_manifest(const std::vector<StimulusPair>& pairs) {
  std::set<std::int64_t> ids;
  for (const auto& p : pairs) {
    if (p.pair_id < 0) throw ConfigError("corpus: negative pair_id " + std::to_string(p.pair_id));
    if (!ids.insert(p.pair_id).second)
      throw ConfigError("corpus: duplicate pair_id " + std::to_string(p.pair_id));
  }
  CorpusManifest manifest;
  manifest.sentences.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    Sentence control = p.plausible;
    control.sentence_id = 2 * p.pair_id;
    control.pair_id = p.pair_id;
    control.condition = Condition::Control;
    Sentence violation = p.violation;
    violation.sentence_id = 2 * p.pair_id + 1;
    violation.pair_id = p.pair_id;
    violation.condition = Condition::Violation;
    manifest.sentences.push_back(std::move(control));
    manifest.sentences.push_back(std::move(violation));
  }
  manifest.control_count = pairs.size();
  manifest.violation_count = pairs.size();
  return manifest;
}

CorpusManifest manifest_from_sentences(std::vector<Sentence> sentences) {
  std::set<std::int64_t> ids;
  CorpusManifest manifest;
  for (const auto& s : sentences) {
    if (!ids.insert(s.sentence_id).second)
      throw FormatError("manifest: duplicate sentence_id " + std::to_string(s.sentence_id));
    (s.condition == Condition::Control ? manifest.control_count : manifest.violation_count)++;
  }
  manifest.sentences = std::move(sentences);
  return manifest;
}

void write_manifest_csv(const CorpusManifest& manifest, std::ostream& out) {
  out << "sentence_id,pair_id,condition,text\n";
  for (const auto& s : manifest.sentences) {
    out << s.sentence_id << ',' << s.pair_id << ',' << to_string(s.condition) << ','
        << csv::quote(s.text) << '\n';
  }
}

void write_manifest_csv(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_manifest_csv(manifest, out);
  if (!out) throw FormatError("write failed: " + path.string());
}

CorpusManifest read_manifest_csv(std::istream& in) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw FormatError("manifest CSV: empty input");
  } while (!line.empty() && line[0] == '#');
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sentence_id,pair_id,condition,text")
    throw FormatError("manifest CSV: unexpected header '" + line + "'");
  std::vector<Sentence> sentences;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    auto fields = csv::split_record(line);
    if (fields.size() != 4)
      throw FormatError("manifest CSV: row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields");
    Sentence s;
    s.sentence_id = csv::parse_int(fields[0]);
    s.pair_id = csv::parse_int(fields[1]);
    s.condition = parse_condition(fields[2]);
    s.text = std::move(fields[3]);
    sentences.push_back(std::move(s));
  }
  return manifest_from_sentences(std::move(sentences));
}

CorpusManifest read_manifest_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_manifest_csv(in);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

}  // namespace probescope
