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

#include "spanmask/decode.hpp"

#include <algorithm>

namespace spanmask {

MergedAnnotation predict_sentence_merged(const ModelParams& params,
                                         const Vocab& vocab,
                                         const Sentence& sentence,
                                         const DecodeThresholds& thresholds) {
  MergedAnnotation out;
  const int n = static_cast<int>(sentence.tokens.size());
  if (n == 0) return out;

  std::vector<int> ids;
  ids.reserve(n + 1);
  ids.push_back(vocab.cls_id());
  for (const auto& tok : sentence.tokens) {
    ids.push_back(tok.vocab_id >= 0 ? tok.vocab_id : vocab.id_of(tok.surface));
  }
  const Encoded enc = encode(params, ids);

  int next_id = 0;
  for (const auto& cand : enumerate_spans(n, params.config.max_span_width)) {
    const Eigen::VectorXd repr =
        span_representation(params, enc.hidden, cand.span);
    const Eigen::VectorXd probs = classify_entity(params, repr);
    int label = 0;
    probs.maxCoeff(&label);
    if (label == kLabelNegative) continue;
    out.entities.push_back({next_id++, cand.span, label});
  }

  for (const auto& trig : out.entities) {
    if (!is_trigger_label(trig.label)) continue;
    for (const auto& arg : out.entities) {
      if (is_trigger_label(arg.label)) continue;
      const Eigen::VectorXd pair =
          pair_representation(params, enc.hidden, trig.span, arg.span);
      if (classify_relation(params, pair) >= thresholds.relation) {
        out.relations.push_back({trig.id, arg.id});
      }
    }
  }
  return out;
}

Annotation predict_sentence(const ModelParams& params, const Vocab& vocab,
                            const Sentence& sentence,
                            const DecodeThresholds& thresholds) {
  const MergedAnnotation merged =
      predict_sentence_merged(params, vocab, sentence, thresholds);
  return unmerge_assertion(merged.entities, merged.relations);
}

std::vector<Event> construct_events(const std::vector<Entity>& entities,
                                    const std::vector<Relation>& relations) {
  return group_events(entities, relations);
}

Corpus predict_corpus(const ModelParams& params, const Vocab& vocab,
                      const Corpus& corpus, const DecodeThresholds& thresholds,
                      int threads) {
  Corpus out = corpus;

  struct Task {
    Sentence* sentence;
  };
  std::vector<Task> tasks;
  for (auto& doc : out.documents) {
    for (auto& sent : doc.sentences) tasks.push_back({&sent});
  }
  parallel_for(static_cast<int>(tasks.size()), threads, [&](int i) {
    Sentence& sent = *tasks[i].sentence;
    const Annotation pred =
        predict_sentence(params, vocab, sent, thresholds);
    SentenceGold gold;
    gold.entities = pred.entities;
    gold.relations = pred.relations;
    sent.gold = std::move(gold);
  });
  return out;
}

}  // namespace spanmask
