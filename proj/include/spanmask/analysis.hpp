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

#ifndef SPANMASK_ANALYSIS_HPP
#define SPANMASK_ANALYSIS_HPP

#include <string>
#include <vector>

#include "spanmask/corpus.hpp"

namespace spanmask {

struct CoveragePoint {
  int rank = 0;  // 1-based: top-k phrases included
  std::string phrase;
  double source_coverage = 0.0;
  double target_coverage = 0.0;
};

// Phrases ranked by source trigger frequency (no filtering); at rank k the
// coverage is the fraction of a domain's trigger instances whose surface is
// among the top-k phrases. Both curves are nondecreasing in k.
std::vector<CoveragePoint> trigger_coverage(const Corpus& source,
                                            const Corpus& target, int top_n);

// Fraction of the phrase's single-token occurrences annotated as an SSx
// trigger with exactly that one-token span. Throws if the phrase never
// occurs in the corpus.
double positive_class_ratio(const Corpus& corpus, const std::string& phrase);

struct FnChangeEntry {
  std::string phrase;
  long long gold_count = 0;
  long long fn_baseline = 0;
  long long fn_masked = 0;
  long long delta() const { return fn_masked - fn_baseline; }
};

// Per-phrase trigger false negatives before/after masking, for the top_n
// most frequent single-token trigger surfaces of the gold (test) corpus.
std::vector<FnChangeEntry> fn_change(const Corpus& gold,
                                     const Corpus& preds_baseline,
                                     const Corpus& preds_masked, int top_n);

struct ScatterRow {
  std::string phrase;
  double source_ratio = 0.0;  // positive-class ratio in the training domain
  double target_ratio = 0.0;  // positive-class ratio in the test domain
  long long delta_fn = 0;
  bool above_diagonal = false;  // target_ratio > source_ratio
};

// Joins fn_change output with positive-class ratios in both domains. A
// phrase with no occurrences in a corpus gets ratio 0 there.
std::vector<ScatterRow> scatter_data(const Corpus& source, const Corpus& target,
                                     const std::vector<FnChangeEntry>& changes);

void write_coverage_csv(const std::string& path,
                        const std::vector<CoveragePoint>& points);
void write_coverage_svg(const std::string& path,
                        const std::vector<CoveragePoint>& points);
void write_scatter_csv(const std::string& path,
                       const std::vector<ScatterRow>& rows);
// Point area scales with |delta FN|; red marks reduced false negatives, blue
// no change or an increase; dashed diagonal.
void write_scatter_svg(const std::string& path,
                       const std::vector<ScatterRow>& rows);

}  // namespace spanmask

#endif  // SPANMASK_ANALYSIS_HPP
