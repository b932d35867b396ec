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

#ifndef SPANMASK_SYNTHGEN_HPP
#define SPANMASK_SYNTHGEN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanmask/corpus.hpp"
#include "spanmask/schema.hpp"

namespace spanmask {

struct WeightedTemplate {
  std::string text;  // whitespace-separated tokens with one {S} symptom slot
  double weight = 1.0;
};

// A synthetic clinical-style domain: a Zipf-distributed symptom lexicon,
// context templates per Assertion subtype, negative-context templates in
// which the symptom word is not annotated, and per-type argument attachment
// probabilities. Labels are correct by construction.
struct DomainSpec {
  std::string name;
  std::vector<std::string> lexicon;  // single-token symptom words, rank order
  double zipf_exponent = 1.1;

  std::map<Subtype, std::vector<WeightedTemplate>> assertion_templates;
  std::vector<WeightedTemplate> unasserted_templates;
  std::vector<WeightedTemplate> negative_templates;
  // Negative contexts that mimic event frames (e.g. "patient reports {S}
  // screening completed"): the symptom word appears in a report-like frame
  // but is not a trigger. These are what make a word's annotation ratio
  // genuinely informative to the classifier.
  std::vector<WeightedTemplate> ambiguous_negative_templates;
  // Probability that a negative-context sentence uses the ambiguous family.
  double ambiguous_negative_prob = 0.0;

  double default_negative_context_prob = 0.0;
  std::map<std::string, double> negative_context_prob;  // per-phrase override

  double unasserted_prob = 0.0;
  std::map<EntityType, double> argument_prob;
  double second_event_prob = 0.0;
  int sentences_per_document = 5;
  std::uint64_t seed = 1;

  double neg_prob_for(const std::string& word) const;
  void check() const;  // throws std::invalid_argument on a bad spec
};

void save_domain_spec(const DomainSpec& spec, const std::string& path);
DomainSpec load_domain_spec(const std::string& path);

struct GeneratedDomain {
  Corpus labeled;
  Corpus unlabeled;  // same distribution, no gold, one-line documents
};

// Deterministic per spec.seed; every sentence carries exact gold annotations
// (Assertion spans coincide with trigger spans).
GeneratedDomain generate_domain(const DomainSpec& spec, int n_sentences,
                                int n_unlabeled_documents);

struct ShiftSummary {
  double lexicon_jaccard = 0.0;
  double target_coverage_at_100 = 0.0;  // target coverage of top source phrases
  double mean_ratio_gap = 0.0;  // mean |source - target| positive-class ratio
};

struct ShiftPair {
  GeneratedDomain source;
  GeneratedDomain target;
  ShiftSummary summary;
};

ShiftPair make_shift_pair(const DomainSpec& source_spec,
                          const DomainSpec& target_spec, int n_source,
                          int n_target, int n_unlabeled_each);

// Shipped presets. "near": target closely mirrors the source distribution.
// "far": trigger ranks shift and frequent source symptoms appear mostly in
// negative contexts, while the target uses them as clean triggers.
DomainSpec near_source_spec();
DomainSpec near_target_spec();
DomainSpec far_source_spec();
DomainSpec far_target_spec();

// Writes "<domain> <text>" lines (documents must be single-line).
void save_plain_corpus(const Corpus& corpus, const std::string& path);

}  // namespace spanmask

#endif  // SPANMASK_SYNTHGEN_HPP
