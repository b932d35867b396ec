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

#ifndef SPANMASK_EVAL_HPP
#define SPANMASK_EVAL_HPP

#include <map>
#include <string>
#include <vector>

#include "spanmask/corpus.hpp"
#include "spanmask/masking.hpp"
#include "spanmask/schema.hpp"

namespace spanmask {

struct TypeCounts {
  long long tp = 0, fp = 0, fn = 0;
  long long nt = 0;  // gold item count

  void add(const TypeCounts& o);
  bool operator==(const TypeCounts&) const = default;
};

struct ScoreCounts {
  std::map<EntityType, TypeCounts> per_type;
  TypeCounts total() const;
  void add(const ScoreCounts& o);
  bool operator==(const ScoreCounts&) const = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R); 0 whenever the denominator
// is 0.
Prf micro_f1(const TypeCounts& counts);

// Exact (type, span) trigger matching with one-to-one assignment per span;
// predictions beyond gold multiplicity are false positives.
ScoreCounts score_triggers(const Corpus& gold, const Corpus& pred);

// A labeled argument counts as correct when span, subtype and the linked
// trigger's span all match. Arguments linked to several triggers score once
// per link; unlinked arguments can only match unlinked ones.
ScoreCounts score_labeled_args(const Corpus& gold, const Corpus& pred);

// Token-overlap scoring: per (type, linked trigger) key, TP is the number of
// token positions covered by both gold and predicted spans, each token
// credited at most once.
ScoreCounts score_span_only_args(const Corpus& gold, const Corpus& pred);

// Gold restated through the merge/unmerge transformation, so Assertion spans
// coincide with their trigger spans exactly as the model predicts them.
Corpus normalize_assertions(const Corpus& corpus);

struct ScoreRow {
  std::string name;
  long long nt = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int bin = -1;   // -1 when not a binned row
  int seed = -1;  // -1 when not attached to a seed
};

// Per-type rows for all three scorers plus labeled/span-only aggregates.
std::vector<ScoreRow> full_report(const Corpus& gold, const Corpus& pred);

struct BinnedScores {
  int rank_lo = 0;
  int rank_hi = 0;
  TypeCounts counts;
};

// Trigger scoring restricted per rank bin of the source-frequency phrase
// list; triggers whose surface is not ranked below the last edge are dropped.
std::vector<BinnedScores> binned_eval(const Corpus& gold, const Corpus& pred,
                                      const PhraseList& phrases,
                                      const std::vector<int>& edges = {
                                          0, 20, 40, 60, 80, 100});

void write_report_csv(const std::string& path,
                      const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_report_csv(const std::string& path);

// e.g. "trigger_f1", "assertion_recall", "anatomy_precision".
double metric_from_report(const std::vector<ScoreRow>& rows,
                          const std::string& metric);

std::string render_report_table(const std::vector<ScoreRow>& rows);

}  // namespace spanmask

#endif  // SPANMASK_EVAL_HPP
