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

#include "spanmask/masking.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "spanmask/rng.hpp"

namespace spanmask {

namespace {

bool punctuation_only(const std::string& s) {
  for (unsigned char c : s) {
    if (std::isalnum(c)) return false;
  }
  return true;
}

bool keepable_phrase(const std::string& surface) {
  if (surface.size() < 2) return false;
  if (punctuation_only(surface)) return false;
  if (surface.find(' ') != std::string::npos) return false;  // multi-token
  return true;
}

using Counts = std::map<std::string, long long>;

Counts count_trigger_surfaces(const Corpus& corpus, const std::string& domain) {
  Counts counts;
  for (const auto& doc : corpus.documents) {
    if (!domain.empty() && doc.domain != domain) continue;
    for (const auto& sent : doc.sentences) {
      if (!sent.gold) continue;
      for (const auto& e : sent.gold->entities) {
        if (e.type != EntityType::kTrigger) continue;
        ++counts[span_surface(sent, e.span)];
      }
    }
  }
  return counts;
}

std::vector<std::pair<std::string, long long>> ranked(const Counts& counts) {
  std::vector<std::pair<std::string, long long>> v(counts.begin(), counts.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return v;
}

// Top-k truncation first, filters second: a filtered-out phrase still uses up
// a rank slot.
std::vector<std::pair<std::string, long long>> top_k_filtered(
    const Counts& counts, int top_k) {
  auto v = ranked(counts);
  if (static_cast<int>(v.size()) > top_k) v.resize(top_k);
  std::erase_if(v, [](const auto& p) { return !keepable_phrase(p.first); });
  return v;
}

}  // namespace

bool PhraseList::contains(const std::string& surface) const {
  return rank_of(surface) >= 0;
}

int PhraseList::rank_of(const std::string& surface) const {
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (phrases[i].first == surface) return static_cast<int>(i);
  }
  return -1;
}

void PhraseList::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write phrase list: " + path);
  for (const auto& [surface, freq] : phrases) {
    out << surface << "\t" << freq << "\n";
  }
}

PhraseList PhraseList::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read phrase list: " + path);
  PhraseList list;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected '<surface>\\t<frequency>'");
    }
    list.phrases.emplace_back(line.substr(0, tab),
                              std::stoll(line.substr(tab + 1)));
  }
  return list;
}

PhraseList build_frequency_list(const Corpus& corpus, int top_k,
                                FrequencyListMode mode) {
  auto pooled = count_trigger_surfaces(corpus, "");
  if (pooled.empty()) {
    throw std::runtime_error("corpus has no gold triggers");
  }

  PhraseList list;
  if (top_k <= 0) return list;

  if (mode == FrequencyListMode::kPooled) {
    list.phrases = top_k_filtered(pooled, top_k);
  } else {
    std::set<std::string> domains;
    for (const auto& doc : corpus.documents) domains.insert(doc.domain);
    std::set<std::string> kept;
    for (const auto& domain : domains) {
      for (const auto& [surface, freq] :
           top_k_filtered(count_trigger_surfaces(corpus, domain), top_k)) {
        kept.insert(surface);
      }
    }
    Counts unioned;
    for (const auto& surface : kept) unioned[surface] = pooled.at(surface);
    list.phrases = ranked(unioned);
  }

  std::set<std::string> domains;
  for (const auto& doc : corpus.documents) domains.insert(doc.domain);
  bool first = true;
  for (const auto& d : domains) {
    if (!first) list.source_domain += "+";
    list.source_domain += d;
    first = false;
  }
  return list;
}

std::pair<Corpus, MaskPlan> apply_dynamic_mask(const Corpus& corpus,
                                               const PhraseList& phrases,
                                               const Vocab& vocab, double rate,
                                               int epoch,
                                               std::uint64_t base_seed) {
  if (rate < 0.0 || rate > 1.0) {
    throw std::invalid_argument("mask rate must lie in [0, 1]");
  }
  std::set<std::string> matchable;
  for (const auto& [surface, freq] : phrases.phrases) matchable.insert(surface);

  Corpus masked = corpus;
  MaskPlan plan;
  plan.epoch = epoch;
  plan.seed = base_seed;
  for (auto& doc : masked.documents) {
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      auto& sent = doc.sentences[s];
      const std::uint64_t uid = sentence_uid(doc, static_cast<int>(s));
      for (std::size_t t = 0; t < sent.tokens.size(); ++t) {
        auto& tok = sent.tokens[t];
        if (matchable.find(tok.surface) == matchable.end()) continue;
        if (!rng::bernoulli_at(base_seed, static_cast<std::uint64_t>(epoch),
                               uid, t, rate)) {
          continue;
        }
        tok.surface = Vocab::kMask;
        tok.vocab_id = vocab.mask_id();
        plan.positions.emplace_back(uid, static_cast<int>(t));
      }
    }
  }
  std::sort(plan.positions.begin(), plan.positions.end());
  return {std::move(masked), std::move(plan)};
}

MlmMasked mlm_mask(const std::vector<int>& token_ids, const Vocab& vocab,
                   double rate, std::uint64_t seed) {
  if (token_ids.empty()) {
    throw std::invalid_argument("mlm_mask requires a nonempty sequence");
  }
  if (rate < 0.0 || rate > 1.0) {
    throw std::invalid_argument("mlm rate must lie in [0, 1]");
  }
  MlmMasked out;
  out.ids = token_ids;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (!vocab.mlm_maskable(token_ids[i])) continue;
    if (!rng::bernoulli_at(seed, 0, 0, i, rate)) continue;
    out.masked_positions.push_back(static_cast<int>(i));
    out.original_ids.push_back(token_ids[i]);
    out.ids[i] = vocab.mask_id();
  }
  return out;
}

}  // namespace spanmask
