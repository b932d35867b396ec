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

#ifndef SPANMASK_DECODE_HPP
#define SPANMASK_DECODE_HPP

#include "spanmask/corpus.hpp"
#include "spanmask/model.hpp"
#include "spanmask/schema.hpp"

namespace spanmask {

struct DecodeThresholds {
  double relation = 0.5;
};

// Labels every enumerated span by argmax over the merged label space, drops
// negatives, then runs the relation classifier over each
// (predicted trigger, predicted argument) pair. Relations whose head is not a
// trigger label are never emitted.
MergedAnnotation predict_sentence_merged(const ModelParams& params,
                                         const Vocab& vocab,
                                         const Sentence& sentence,
                                         const DecodeThresholds& thresholds);

// predict_sentence_merged followed by unmerge_assertion.
Annotation predict_sentence(const ModelParams& params, const Vocab& vocab,
                            const Sentence& sentence,
                            const DecodeThresholds& thresholds);

// One event per trigger entity; non-trigger entities become arguments of
// every trigger they are linked to.
std::vector<Event> construct_events(const std::vector<Entity>& entities,
                                    const std::vector<Relation>& relations);

// Predicts every sentence; the result mirrors the input corpus with gold
// replaced by predictions (same JSON-lines format as gold annotations).
Corpus predict_corpus(const ModelParams& params, const Vocab& vocab,
                      const Corpus& corpus, const DecodeThresholds& thresholds,
                      int threads = 1);

}  // namespace spanmask

#endif  // SPANMASK_DECODE_HPP
