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

#ifndef SPANMASK_CORPUS_HPP
#define SPANMASK_CORPUS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spanmask/schema.hpp"

namespace spanmask {

// Character interval [start, end) in a document's text.
struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const CharRange&) const = default;
};

struct Token {
  std::string surface;   // lowercased
  int vocab_id = -1;     // -1 until a vocabulary is applied
  CharRange char_range;  // in the owning document's text
  bool operator==(const Token&) const = default;
};

struct SentenceGold {
  std::vector<Entity> entities;
  std::vector<Relation> relations;
  bool operator==(const SentenceGold&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::optional<SentenceGold> gold;
  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::string id;
  std::string domain;
  std::string text;
  std::vector<Sentence> sentences;
  bool operator==(const Document&) const = default;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t num_sentences() const;
  bool operator==(const Corpus&) const = default;
};

// Stable 64-bit identifier for a sentence, used to key per-position RNG.
std::uint64_t sentence_uid(const Document& doc, int sentence_index);

// --- text processing -------------------------------------------------------

// Rule-based splitter: breaks on newlines and on sentence-final .!? followed
// by whitespace and an uppercase letter. Ranges are trimmed to non-whitespace
// text and jointly cover every non-whitespace character.
std::vector<CharRange> split_sentences(const std::string& text);

// Lowercases, splits on whitespace, and makes each punctuation character a
// standalone token. Idempotent on its own space-joined output.
std::vector<std::string> tokenize(const std::string& sentence_text);

// tokenize() plus character offsets relative to `base` (the range's start
// position within the full document text).
std::vector<Token> tokenize_with_ranges(const std::string& text,
                                        const CharRange& range);

// Splits + tokenizes raw text into an unannotated document.
Document make_document(const std::string& id, const std::string& domain,
                       const std::string& text);

// --- vocabulary -------------------------------------------------------------

class Vocab {
 public:
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kMask = "[MASK]";
  static constexpr const char* kCls = "[CLS]";  // sentence-start

  // Reserved tokens first ([PAD] [UNK] [MASK] [CLS], then one domain
  // indicator per tag in `domains`, sorted), then surfaces by descending
  // frequency with lexicographic tie-break, truncated to max_size.
  static Vocab build(const std::vector<const Corpus*>& corpora, int max_size,
                     const std::vector<std::string>& extra_domains = {});

  int size() const { return static_cast<int>(id_to_surface_.size()); }
  int num_reserved() const { return num_reserved_; }
  int pad_id() const { return 0; }
  int unk_id() const { return 1; }
  int mask_id() const { return 2; }
  int cls_id() const { return 3; }

  // [UNK] id for out-of-vocabulary surfaces.
  int id_of(const std::string& surface) const;
  const std::string& surface_of(int id) const;
  bool contains(const std::string& surface) const;
  // Throws if the domain has no indicator token.
  int domain_indicator_id(const std::string& domain) const;
  bool is_reserved(int id) const { return id < num_reserved_; }
  // Positions that the MLM masker must never touch: [PAD], [CLS] and the
  // domain indicators.
  bool mlm_maskable(int id) const;

  static std::string domain_indicator_surface(const std::string& domain);

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  Vocab() = default;
  void index_reserved();

  std::vector<std::string> id_to_surface_;
  std::map<std::string, int> surface_to_id_;
  std::map<std::string, int> domain_to_id_;
  int num_reserved_ = 0;
};

// Assigns vocab ids to every token (UNK for out-of-vocabulary surfaces).
void apply_vocab(Corpus& corpus, const Vocab& vocab);

// --- spans ------------------------------------------------------------------

struct SpanCandidate {
  TokenSpan span;
  int width() const { return span.width(); }
};

// All [i, j) with 1 <= j - i <= max_span_width, in lexicographic order.
// Count = sum over w of max(0, n - w + 1).
std::vector<SpanCandidate> enumerate_spans(int sentence_length,
                                           int max_span_width);

inline constexpr int kDefaultMaxSpanWidth = 10;

// --- validation -------------------------------------------------------------

std::vector<Violation> validate(const Corpus& corpus);

// --- serialization ----------------------------------------------------------

// JSON-lines annotation format, one document per line:
//   {"id":..., "domain":..., "text":...,
//    "sentences":[{"token_ranges":[[s,e],...],
//                  "entities":[{"id":..,"type":..,"subtype":..,"start":..,"end":..}],
//                  "relations":[{"head":..,"tail":..}]}]}
// "entities"/"relations" are omitted together for unannotated sentences.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// Plain-text unlabeled corpus: one document per line, first
// whitespace-delimited field is the domain tag.
Corpus load_plain_corpus(const std::string& path);

// The surface form of a span: token surfaces joined by single spaces.
std::string span_surface(const Sentence& sentence, const TokenSpan& span);

}  // namespace spanmask

#endif  // SPANMASK_CORPUS_HPP
