// Copyright 2026 The spanmask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spanmask/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spanmask/rng.hpp"

namespace spanmask {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)); }

bool is_word_char(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80;  // keep UTF-8 sequences intact
}

std::string lowercased(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::size_t Corpus::num_sentences() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.sentences.size();
  return n;
}

std::uint64_t sentence_uid(const Document& doc, int sentence_index) {
  return rng::combine(rng::fnv1a(doc.id),
                      static_cast<std::uint64_t>(sentence_index));
}

std::vector<CharRange> split_sentences(const std::string& text) {
  std::vector<CharRange> raw;
  std::size_t start = 0;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    char c = text[i];
    if (c == '\n') {
      raw.push_back({start, i});
      start = i + 1;
      continue;
    }
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i + 1;
      while (j < n && text[j] != '\n' && is_space(text[j])) ++j;
      if (j > i + 1 && j < n && is_upper(text[j])) {
        raw.push_back({start, i + 1});
        start = i + 1;
      }
    }
  }
  if (start < n) raw.push_back({start, n});

  std::vector<CharRange> out;
  for (auto r : raw) {
    while (r.start < r.end && is_space(text[r.start])) ++r.start;
    while (r.end > r.start && is_space(text[r.end - 1])) --r.end;
    if (r.start < r.end) out.push_back(r);
  }
  return out;
}

std::vector<Token> tokenize_with_ranges(const std::string& text,
                                        const CharRange& range) {
  std::vector<Token> tokens;
  std::size_t i = range.start;
  while (i < range.end) {
    char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (is_word_char(c)) {
      while (i < range.end && is_word_char(text[i])) ++i;
    } else {
      ++i;  // one punctuation character per token
    }
    Token t;
    t.char_range = {start, i};
    t.surface = lowercased(std::string_view(text).substr(start, i - start));
    tokens.push_back(std::move(t));
  }
  return tokens;
}

std::vector<std::string> tokenize(const std::string& sentence_text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_ranges(sentence_text, {0, sentence_text.size()})) {
    out.push_back(std::move(t.surface));
  }
  return out;
}

Document make_document(const std::string& id, const std::string& domain,
                       const std::string& text) {
  Document doc;
  doc.id = id;
  doc.domain = domain;
  doc.text = text;
  for (const auto& range : split_sentences(doc.text)) {
    Sentence s;
    s.tokens = tokenize_with_ranges(doc.text, range);
    doc.sentences.push_back(std::move(s));
  }
  return doc;
}

// --- vocabulary -------------------------------------------------------------

std::string Vocab::domain_indicator_surface(const std::string& domain) {
  return "[DOM=" + domain + "]";
}

Vocab Vocab::build(const std::vector<const Corpus*>& corpora, int max_size,
                   const std::vector<std::string>& extra_domains) {
  bool any_document = false;
  std::set<std::string> domains(extra_domains.begin(), extra_domains.end());
  std::map<std::string, long long> freq;
  for (const Corpus* corpus : corpora) {
    for (const auto& doc : corpus->documents) {
      any_document = true;
      domains.insert(doc.domain);
      for (const auto& sent : doc.sentences) {
        for (const auto& tok : sent.tokens) ++freq[tok.surface];
      }
    }
  }
  if (!any_document) throw std::runtime_error("cannot build vocab: empty corpus");

  Vocab v;
  v.id_to_surface_ = {kPad, kUnk, kMask, kCls};
  for (const auto& d : domains) {
    v.id_to_surface_.push_back(domain_indicator_surface(d));
  }
  v.num_reserved_ = static_cast<int>(v.id_to_surface_.size());
  if (max_size <= v.num_reserved_) {
    throw std::invalid_argument("vocab max_size must exceed reserved count (" +
                                std::to_string(v.num_reserved_) + ")");
  }

  std::vector<std::pair<std::string, long long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [surface, count] : ranked) {
    if (static_cast<int>(v.id_to_surface_.size()) >= max_size) break;
    v.id_to_surface_.push_back(surface);
  }
  v.index_reserved();
  return v;
}

void Vocab::index_reserved() {
  surface_to_id_.clear();
  domain_to_id_.clear();
  for (int i = 0; i < static_cast<int>(id_to_surface_.size()); ++i) {
    surface_to_id_[id_to_surface_[i]] = i;
    const std::string& s = id_to_surface_[i];
    if (s.size() > 6 && s.rfind("[DOM=", 0) == 0 && s.back() == ']') {
      domain_to_id_[s.substr(5, s.size() - 6)] = i;
    }
  }
}

int Vocab::id_of(const std::string& surface) const {
  auto it = surface_to_id_.find(surface);
  return it == surface_to_id_.end() ? unk_id() : it->second;
}

const std::string& Vocab::surface_of(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocab id out of range");
  return id_to_surface_[id];
}

bool Vocab::contains(const std::string& surface) const {
  return surface_to_id_.count(surface) != 0;
}

int Vocab::domain_indicator_id(const std::string& domain) const {
  auto it = domain_to_id_.find(domain);
  if (it == domain_to_id_.end()) {
    throw std::runtime_error("no domain indicator token for '" + domain + "'");
  }
  return it->second;
}

bool Vocab::mlm_maskable(int id) const {
  if (id == pad_id() || id == cls_id()) return false;
  const std::string& s = surface_of(id);
  return !(s.rfind("[DOM=", 0) == 0);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path);
  out << "spanmask-vocab\t1\n";
  for (const auto& s : id_to_surface_) out << s << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocab file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "spanmask-vocab\t1") {
    throw std::runtime_error("bad vocab header in " + path);
  }
  Vocab v;
  while (std::getline(in, line)) v.id_to_surface_.push_back(line);
  if (v.id_to_surface_.size() < 4 || v.id_to_surface_[0] != kPad ||
      v.id_to_surface_[1] != kUnk || v.id_to_surface_[2] != kMask ||
      v.id_to_surface_[3] != kCls) {
    throw std::runtime_error("vocab file missing reserved tokens: " + path);
  }
  int i = 4;
  while (i < static_cast<int>(v.id_to_surface_.size()) &&
         v.id_to_surface_[i].rfind("[DOM=", 0) == 0) {
    ++i;
  }
  v.num_reserved_ = i;
  v.index_reserved();
  return v;
}

void apply_vocab(Corpus& corpus, const Vocab& vocab) {
  for (auto& doc : corpus.documents) {
    for (auto& sent : doc.sentences) {
      for (auto& tok : sent.tokens) tok.vocab_id = vocab.id_of(tok.surface);
    }
  }
}

// --- spans ------------------------------------------------------------------

std::vector<SpanCandidate> enumerate_spans(int sentence_length,
                                           int max_span_width) {
  if (max_span_width < 1) {
    throw std::invalid_argument("max_span_width must be >= 1");
  }
  std::vector<SpanCandidate> out;
  for (int i = 0; i < sentence_length; ++i) {
    int max_end = std::min(sentence_length, i + max_span_width);
    for (int j = i + 1; j <= max_end; ++j) out.push_back({{i, j}});
  }
  return out;
}

// --- validation -------------------------------------------------------------

namespace {

void validate_sentence(const Document& doc, int sent_idx,
                       const Sentence& sent, std::vector<Violation>* out) {
  if (!sent.gold) return;
  const auto& gold = *sent.gold;
  const int n = static_cast<int>(sent.tokens.size());

  std::map<int, const Entity*> by_id;
  for (const auto& e : gold.entities) {
    if (!by_id.emplace(e.id, &e).second) {
      out->push_back({doc.id, sent_idx, "duplicate-id",
                      "entity id " + std::to_string(e.id) + " repeated",
                      Severity::kError});
    }
    if (!(0 <= e.span.start && e.span.start < e.span.end && e.span.end <= n)) {
      out->push_back({doc.id, sent_idx, "span-bounds",
                      "entity " + std::to_string(e.id) + " span [" +
                          std::to_string(e.span.start) + "," +
                          std::to_string(e.span.end) + ") outside sentence of " +
                          std::to_string(n) + " tokens",
                      Severity::kError});
    }
    if (is_labeled_argument(e.type)) {
      if (!e.subtype) {
        out->push_back({doc.id, sent_idx, "subtype",
                        "labeled argument " + std::to_string(e.id) +
                            " lacks a subtype",
                        Severity::kError});
      } else if (subtype_owner(*e.subtype) != e.type) {
        out->push_back({doc.id, sent_idx, "subtype",
                        "entity " + std::to_string(e.id) + " of type " +
                            entity_type_name(e.type) + " carries subtype '" +
                            subtype_name(*e.subtype) + "'",
                        Severity::kError});
      }
    } else if (e.subtype) {
      out->push_back({doc.id, sent_idx, "subtype",
                      "entity " + std::to_string(e.id) + " of type " +
                          entity_type_name(e.type) + " must not carry a subtype",
                      Severity::kError});
    }
  }

  std::map<int, int> assertions_per_trigger;
  for (const auto& r : gold.relations) {
    auto head = by_id.find(r.head);
    auto tail = by_id.find(r.tail);
    if (head == by_id.end() || tail == by_id.end()) {
      out->push_back({doc.id, sent_idx, "relation-id",
                      "relation (" + std::to_string(r.head) + "," +
                          std::to_string(r.tail) + ") references unknown entity",
                      Severity::kError});
      continue;
    }
    if (head->second->type != EntityType::kTrigger) {
      out->push_back({doc.id, sent_idx, "relation-head",
                      "relation head " + std::to_string(r.head) +
                          " is not a trigger",
                      Severity::kError});
    }
    if (tail->second->type == EntityType::kTrigger) {
      out->push_back({doc.id, sent_idx, "relation-tail",
                      "relation tail " + std::to_string(r.tail) +
                          " must be a non-trigger argument",
                      Severity::kError});
    } else if (tail->second->type == EntityType::kAssertion) {
      if (++assertions_per_trigger[r.head] == 2) {
        out->push_back({doc.id, sent_idx, "double-assertion",
                        "trigger " + std::to_string(r.head) +
                            " linked to more than one Assertion",
                        Severity::kError});
      }
    }
  }

  // Overlapping gold entities of the same type are flagged, not rejected.
  for (std::size_t a = 0; a < gold.entities.size(); ++a) {
    for (std::size_t b = a + 1; b < gold.entities.size(); ++b) {
      const auto& ea = gold.entities[a];
      const auto& eb = gold.entities[b];
      if (ea.type == eb.type && ea.span.start < eb.span.end &&
          eb.span.start < ea.span.end) {
        out->push_back({doc.id, sent_idx, "overlap",
                        "entities " + std::to_string(ea.id) + " and " +
                            std::to_string(eb.id) + " of type " +
                            entity_type_name(ea.type) + " overlap",
                        Severity::kWarning});
      }
    }
  }
}

}  // namespace

std::vector<Violation> validate(const Corpus& corpus) {
  std::vector<Violation> out;
  for (const auto& doc : corpus.documents) {
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      validate_sentence(doc, static_cast<int>(s), doc.sentences[s], &out);
    }
  }
  return out;
}

// --- serialization ----------------------------------------------------------

namespace {

using nlohmann::json;

json entity_to_json(const Entity& e) {
  json j;
  j["id"] = e.id;
  j["type"] = entity_type_name(e.type);
  if (e.subtype) j["subtype"] = subtype_name(*e.subtype);
  j["start"] = e.span.start;
  j["end"] = e.span.end;
  return j;
}

Entity entity_from_json(const json& j) {
  Entity e;
  e.id = j.at("id").get<int>();
  auto type = entity_type_from_name(j.at("type").get<std::string>());
  if (!type) {
    throw std::runtime_error("unknown entity type '" +
                             j.at("type").get<std::string>() + "'");
  }
  e.type = *type;
  if (j.contains("subtype")) {
    auto st = subtype_from_name(j.at("subtype").get<std::string>());
    if (!st) {
      throw std::runtime_error("unknown subtype '" +
                               j.at("subtype").get<std::string>() + "'");
    }
    e.subtype = *st;
  }
  e.span.start = j.at("start").get<int>();
  e.span.end = j.at("end").get<int>();
  return e;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& doc : corpus.documents) {
    json j;
    j["id"] = doc.id;
    j["domain"] = doc.domain;
    j["text"] = doc.text;
    json sentences = json::array();
    for (const auto& sent : doc.sentences) {
      json s;
      json ranges = json::array();
      for (const auto& t : sent.tokens) {
        ranges.push_back({t.char_range.start, t.char_range.end});
      }
      s["token_ranges"] = std::move(ranges);
      if (sent.gold) {
        json ents = json::array();
        for (const auto& e : sent.gold->entities) ents.push_back(entity_to_json(e));
        json rels = json::array();
        for (const auto& r : sent.gold->relations) {
          rels.push_back({{"head", r.head}, {"tail", r.tail}});
        }
        s["entities"] = std::move(ents);
        s["relations"] = std::move(rels);
      }
      sentences.push_back(std::move(s));
    }
    j["sentences"] = std::move(sentences);
    out << j.dump() << "\n";
  }
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path);
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      Document doc;
      doc.id = j.at("id").get<std::string>();
      doc.domain = j.at("domain").get<std::string>();
      doc.text = j.at("text").get<std::string>();
      for (const auto& js : j.at("sentences")) {
        Sentence sent;
        std::size_t prev_end = 0;
        for (const auto& jr : js.at("token_ranges")) {
          CharRange r{jr.at(0).get<std::size_t>(), jr.at(1).get<std::size_t>()};
          if (r.start >= r.end || r.end > doc.text.size() || r.start < prev_end) {
            throw std::runtime_error("bad token range [" +
                                     std::to_string(r.start) + "," +
                                     std::to_string(r.end) + ")");
          }
          prev_end = r.end;
          Token t;
          t.char_range = r;
          t.surface = lowercased(
              std::string_view(doc.text).substr(r.start, r.end - r.start));
          sent.tokens.push_back(std::move(t));
        }
        if (js.contains("entities") || js.contains("relations")) {
          SentenceGold gold;
          for (const auto& je : js.value("entities", json::array())) {
            gold.entities.push_back(entity_from_json(je));
          }
          for (const auto& jr : js.value("relations", json::array())) {
            gold.relations.push_back(
                {jr.at("head").get<int>(), jr.at("tail").get<int>()});
          }
          sent.gold = std::move(gold);
        }
        doc.sentences.push_back(std::move(sent));
      }
      corpus.documents.push_back(std::move(doc));
    } catch (const SchemaError&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  auto violations = validate(corpus);
  if (has_errors(violations)) {
    std::ostringstream os;
    os << path << ": corpus violates schema invariants:";
    int shown = 0;
    for (const auto& v : violations) {
      if (v.severity != Severity::kError) continue;
      os << "\n  " << violation_to_string(v);
      if (++shown == 10) break;
    }
    throw SchemaError(os.str());
  }
  return corpus;
}

Corpus load_plain_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read text file: " + path);
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t split = 0;
    while (split < line.size() && !is_space(line[split])) ++split;
    if (split == line.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected '<domain> <text>'");
    }
    std::string domain = line.substr(0, split);
    while (split < line.size() && is_space(line[split])) ++split;
    std::ostringstream id;
    id << "line-" << line_no;
    corpus.documents.push_back(
        make_document(id.str(), domain, line.substr(split)));
  }
  return corpus;
}

std::string span_surface(const Sentence& sentence, const TokenSpan& span) {
  std::string out;
  for (int i = span.start; i < span.end; ++i) {
    if (i > span.start) out += ' ';
    out += sentence.tokens[i].surface;
  }
  return out;
}

}  // namespace spanmask
