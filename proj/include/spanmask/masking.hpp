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

#ifndef SPANMASK_MASKING_HPP
#define SPANMASK_MASKING_HPP

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spanmask/corpus.hpp"

namespace spanmask {

// Ranked frequent trigger phrases from a source domain. Kept phrases are a
// single token, not punctuation-only, and at least two characters long.
struct PhraseList {
  std::vector<std::pair<std::string, long long>> phrases;  // descending freq
  std::string source_domain;

  bool contains(const std::string& surface) const;
  // Rank of a surface in the list, or -1.
  int rank_of(const std::string& surface) const;

  void save(const std::string& path) const;  // two-column TSV
  static PhraseList load(const std::string& path);
};

enum class FrequencyListMode {
  kPooled,          // counts pooled over the whole corpus
  kPerDomainUnion,  // per-domain top-k lists, unioned, pooled counts
};

// Counts gold trigger surfaces (lowercased), truncates to the top_k most
// frequent (ties lexicographic) and then drops multi-token, punctuation-only
// and single-character phrases. Throws if the corpus has no gold triggers.
PhraseList build_frequency_list(const Corpus& corpus, int top_k,
                                FrequencyListMode mode = FrequencyListMode::kPooled);

struct MaskPlan {
  int epoch = 0;
  std::uint64_t seed = 0;
  // (sentence uid, token index), sorted.
  std::vector<std::pair<std::uint64_t, int>> positions;

  bool operator==(const MaskPlan&) const = default;
};

// Independently replaces each token whose surface is in the phrase list with
// [MASK] at the given rate, regardless of gold annotation. Gold labels are
// untouched. The draw at a position is a pure function of
// (base_seed, epoch, sentence uid, token index).
std::pair<Corpus, MaskPlan> apply_dynamic_mask(const Corpus& corpus,
                                               const PhraseList& phrases,
                                               const Vocab& vocab, double rate,
                                               int epoch,
                                               std::uint64_t base_seed);

struct MlmMasked {
  std::vector<int> ids;              // with [MASK] substituted
  std::vector<int> masked_positions; // ascending
  std::vector<int> original_ids;     // originals at masked_positions
};

// Masks each maskable position independently at `rate`. Reserved positions
// ([PAD], sentence-start, domain indicators) are never masked.
MlmMasked mlm_mask(const std::vector<int>& token_ids, const Vocab& vocab,
                   double rate, std::uint64_t seed);

}  // namespace spanmask

#endif  // SPANMASK_MASKING_HPP
