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

#include "spanmask/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace spanmask {

namespace {

// Sentinel "linked trigger" span for arguments without any incoming relation.
const TokenSpan kNoTrigger{-1, -1};

void check_aligned(const Corpus& gold, const Corpus& pred) {
  if (gold.documents.size() != pred.documents.size()) {
    throw std::runtime_error("sentence-set mismatch: document counts differ");
  }
  for (std::size_t d = 0; d < gold.documents.size(); ++d) {
    const auto& g = gold.documents[d];
    const auto& p = pred.documents[d];
    if (g.id != p.id) {
      throw std::runtime_error("sentence-set mismatch: document '" + g.id +
                               "' vs '" + p.id + "'");
    }
    if (g.sentences.size() != p.sentences.size()) {
      throw std::runtime_error("sentence-set mismatch in document '" + g.id +
                               "': sentence counts differ");
    }
    for (std::size_t s = 0; s < g.sentences.size(); ++s) {
      if (g.sentences[s].tokens.size() != p.sentences[s].tokens.size()) {
        throw std::runtime_error("sentence-set mismatch in document '" + g.id +
                                 "' sentence " + std::to_string(s) +
                                 ": token counts differ");
      }
    }
  }
}

template <typename Fn>
void for_each_sentence_pair(const Corpus& gold, const Corpus& pred, Fn fn) {
  check_aligned(gold, pred);
  for (std::size_t d = 0; d < gold.documents.size(); ++d) {
    for (std::size_t s = 0; s < gold.documents[d].sentences.size(); ++s) {
      fn(gold.documents[d].sentences[s], pred.documents[d].sentences[s]);
    }
  }
}

// Multiset matching: per key, min(gold, pred) are true positives.
template <typename Key>
TypeCounts match_multisets(const std::map<Key, long long>& gold,
                           const std::map<Key, long long>& pred) {
  TypeCounts c;
  for (const auto& [key, g] : gold) {
    c.nt += g;
    auto it = pred.find(key);
    const long long p = it == pred.end() ? 0 : it->second;
    c.tp += std::min(g, p);
    c.fn += std::max(0LL, g - p);
  }
  for (const auto& [key, p] : pred) {
    auto it = gold.find(key);
    const long long g = it == gold.end() ? 0 : it->second;
    c.fp += std::max(0LL, p - g);
  }
  return c;
}

std::map<TokenSpan, long long> trigger_spans(const Sentence& sent) {
  std::map<TokenSpan, long long> out;
  if (!sent.gold) return out;
  for (const auto& e : sent.gold->entities) {
    if (e.type == EntityType::kTrigger) ++out[e.span];
  }
  return out;
}

// (subtype, span, linked trigger span) items per labeled-argument type.
using LabeledKey = std::tuple<Subtype, TokenSpan, TokenSpan>;

std::map<EntityType, std::map<LabeledKey, long long>> labeled_items(
    const Sentence& sent) {
  std::map<EntityType, std::map<LabeledKey, long long>> out;
  if (!sent.gold) return out;
  std::map<int, const Entity*> by_id;
  std::set<int> linked;
  for (const auto& e : sent.gold->entities) by_id[e.id] = &e;
  for (const auto& r : sent.gold->relations) {
    const Entity* head = by_id.at(r.head);
    const Entity* tail = by_id.at(r.tail);
    if (!is_labeled_argument(tail->type)) continue;
    linked.insert(tail->id);
    ++out[tail->type][{*tail->subtype, tail->span, head->span}];
  }
  for (const auto& e : sent.gold->entities) {
    if (!is_labeled_argument(e.type) || linked.count(e.id)) continue;
    ++out[e.type][{*e.subtype, e.span, kNoTrigger}];
  }
  return out;
}

// Per (type, linked trigger span): the set of covered token positions and the
// number of gold/pred items for NT bookkeeping.
struct SpanOnlyGroup {
  std::set<int> positions;
  long long items = 0;
};

std::map<EntityType, std::map<TokenSpan, SpanOnlyGroup>> span_only_groups(
    const Sentence& sent) {
  std::map<EntityType, std::map<TokenSpan, SpanOnlyGroup>> out;
  if (!sent.gold) return out;
  std::map<int, const Entity*> by_id;
  std::set<int> linked;
  for (const auto& e : sent.gold->entities) by_id[e.id] = &e;
  auto add = [&out](const Entity& e, const TokenSpan& trigger) {
    auto& group = out[e.type][trigger];
    ++group.items;
    for (int i = e.span.start; i < e.span.end; ++i) group.positions.insert(i);
  };
  for (const auto& r : sent.gold->relations) {
    const Entity* head = by_id.at(r.head);
    const Entity* tail = by_id.at(r.tail);
    if (!is_span_only_argument(tail->type)) continue;
    linked.insert(tail->id);
    add(*tail, head->span);
  }
  for (const auto& e : sent.gold->entities) {
    if (!is_span_only_argument(e.type) || linked.count(e.id)) continue;
    add(e, kNoTrigger);
  }
  return out;
}

}  // namespace

void TypeCounts::add(const TypeCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  nt += o.nt;
}

TypeCounts ScoreCounts::total() const {
  TypeCounts t;
  for (const auto& [type, c] : per_type) t.add(c);
  return t;
}

void ScoreCounts::add(const ScoreCounts& o) {
  for (const auto& [type, c] : o.per_type) per_type[type].add(c);
}

Prf micro_f1(const TypeCounts& counts) {
  Prf out;
  const double tp = static_cast<double>(counts.tp);
  if (counts.tp + counts.fp > 0) out.precision = tp / (counts.tp + counts.fp);
  if (counts.tp + counts.fn > 0) out.recall = tp / (counts.tp + counts.fn);
  if (out.precision + out.recall > 0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

ScoreCounts score_triggers(const Corpus& gold, const Corpus& pred) {
  ScoreCounts out;
  out.per_type[EntityType::kTrigger] = {};
  for_each_sentence_pair(gold, pred, [&](const Sentence& g, const Sentence& p) {
    out.per_type[EntityType::kTrigger].add(
        match_multisets(trigger_spans(g), trigger_spans(p)));
  });
  return out;
}

ScoreCounts score_labeled_args(const Corpus& gold, const Corpus& pred) {
  ScoreCounts out;
  for (EntityType t : {EntityType::kAssertion, EntityType::kChange,
                       EntityType::kSeverity}) {
    out.per_type[t] = {};
  }
  for_each_sentence_pair(gold, pred, [&](const Sentence& g, const Sentence& p) {
    auto gi = labeled_items(g);
    auto pi = labeled_items(p);
    for (auto& [type, counts] : out.per_type) {
      counts.add(match_multisets(gi[type], pi[type]));
    }
  });
  return out;
}

ScoreCounts score_span_only_args(const Corpus& gold, const Corpus& pred) {
  ScoreCounts out;
  for (EntityType t : {EntityType::kAnatomy, EntityType::kCharacteristics,
                       EntityType::kDuration, EntityType::kFrequency}) {
    out.per_type[t] = {};
  }
  for_each_sentence_pair(gold, pred, [&](const Sentence& g, const Sentence& p) {
    auto gg = span_only_groups(g);
    auto pg = span_only_groups(p);
    for (auto& [type, counts] : out.per_type) {
      auto& gold_groups = gg[type];
      auto& pred_groups = pg[type];
      for (const auto& [trigger, group] : gold_groups) {
        counts.nt += group.items;
        auto it = pred_groups.find(trigger);
        if (it == pred_groups.end()) {
          counts.fn += static_cast<long long>(group.positions.size());
          continue;
        }
        for (int pos : group.positions) {
          if (it->second.positions.count(pos)) {
            ++counts.tp;
          } else {
            ++counts.fn;
          }
        }
      }
      for (const auto& [trigger, group] : pred_groups) {
        auto it = gold_groups.find(trigger);
        for (int pos : group.positions) {
          if (it == gold_groups.end() || !it->second.positions.count(pos)) {
            ++counts.fp;
          }
        }
      }
    }
  });
  return out;
}

Corpus normalize_assertions(const Corpus& corpus) {
  Corpus out = corpus;
  for (auto& doc : out.documents) {
    for (auto& sent : doc.sentences) {
      if (!sent.gold) continue;
      const auto merged =
          merge_annotation(sent.gold->entities, sent.gold->relations);
      const auto restored = unmerge_assertion(merged.entities, merged.relations);
      sent.gold->entities = restored.entities;
      sent.gold->relations = restored.relations;
    }
  }
  return out;
}

namespace {

ScoreRow make_row(const std::string& name, const TypeCounts& counts) {
  const Prf prf = micro_f1(counts);
  ScoreRow row;
  row.name = name;
  row.nt = counts.nt;
  row.precision = prf.precision;
  row.recall = prf.recall;
  row.f1 = prf.f1;
  return row;
}

}  // namespace

std::vector<ScoreRow> full_report(const Corpus& gold, const Corpus& pred) {
  std::vector<ScoreRow> rows;
  const ScoreCounts triggers = score_triggers(gold, pred);
  rows.push_back(
      make_row("SSx", triggers.per_type.at(EntityType::kTrigger)));

  const ScoreCounts labeled = score_labeled_args(gold, pred);
  for (EntityType t : {EntityType::kAssertion, EntityType::kChange,
                       EntityType::kSeverity}) {
    rows.push_back(make_row(entity_type_name(t), labeled.per_type.at(t)));
  }
  rows.push_back(make_row("LabeledArgs", labeled.total()));

  const ScoreCounts span_only = score_span_only_args(gold, pred);
  for (EntityType t : {EntityType::kAnatomy, EntityType::kCharacteristics,
                       EntityType::kDuration, EntityType::kFrequency}) {
    rows.push_back(make_row(entity_type_name(t), span_only.per_type.at(t)));
  }
  rows.push_back(make_row("SpanOnlyArgs", span_only.total()));
  return rows;
}

std::vector<BinnedScores> binned_eval(const Corpus& gold, const Corpus& pred,
                                      const PhraseList& phrases,
                                      const std::vector<int>& edges) {
  if (phrases.phrases.empty()) {
    throw std::runtime_error("binned_eval requires a nonempty phrase list");
  }
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
    throw std::invalid_argument("bin edges must be ascending with >= 2 entries");
  }

  std::vector<BinnedScores> bins;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    bins.push_back({edges[i], edges[i + 1], {}});
  }

  auto binned_spans = [&phrases](const Sentence& sent, int lo, int hi) {
    std::map<TokenSpan, long long> out;
    if (!sent.gold) return out;
    for (const auto& e : sent.gold->entities) {
      if (e.type != EntityType::kTrigger) continue;
      const int rank = phrases.rank_of(span_surface(sent, e.span));
      if (rank >= lo && rank < hi) ++out[e.span];
    }
    return out;
  };

  for_each_sentence_pair(gold, pred, [&](const Sentence& g, const Sentence& p) {
    for (auto& bin : bins) {
      bin.counts.add(match_multisets(binned_spans(g, bin.rank_lo, bin.rank_hi),
                                     binned_spans(p, bin.rank_lo, bin.rank_hi)));
    }
  });
  return bins;
}

void write_report_csv(const std::string& path,
                      const std::vector<ScoreRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "type,nt,precision,recall,f1,bin,seed\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%.6f,%.6f,%.6f,", r.name.c_str(),
                  r.nt, r.precision, r.recall, r.f1);
    out << buf;
    if (r.bin >= 0) out << r.bin;
    out << ",";
    if (r.seed >= 0) out << r.seed;
    out << "\n";
  }
}

std::vector<ScoreRow> read_report_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read report: " + path);
  std::vector<ScoreRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 7) fields.push_back("");
    ScoreRow r;
    r.name = fields[0];
    r.nt = std::stoll(fields[1]);
    r.precision = std::stod(fields[2]);
    r.recall = std::stod(fields[3]);
    r.f1 = std::stod(fields[4]);
    r.bin = fields[5].empty() ? -1 : std::stoi(fields[5]);
    r.seed = fields[6].empty() ? -1 : std::stoi(fields[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

double metric_from_report(const std::vector<ScoreRow>& rows,
                          const std::string& metric) {
  const auto split = metric.rfind('_');
  if (split == std::string::npos) {
    throw std::invalid_argument("metric must look like '<type>_<f1|precision|recall>'");
  }
  std::string type = metric.substr(0, split);
  const std::string stat = metric.substr(split + 1);

  std::string row_name;
  if (type == "trigger" || type == "ssx") {
    row_name = "SSx";
  } else if (type == "labeled_args") {
    row_name = "LabeledArgs";
  } else if (type == "span_only_args") {
    row_name = "SpanOnlyArgs";
  } else {
    row_name = type;
    row_name[0] = static_cast<char>(std::toupper(row_name[0]));
  }

  for (const auto& r : rows) {
    if (r.name != row_name) continue;
    if (stat == "f1") return r.f1;
    if (stat == "precision") return r.precision;
    if (stat == "recall") return r.recall;
    throw std::invalid_argument("unknown statistic '" + stat + "'");
  }
  throw std::runtime_error("report has no row named '" + row_name + "'");
}

std::string render_report_table(const std::vector<ScoreRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %8s %10s %10s %10s\n", "Entity", "NT",
                "P", "R", "F1");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-16s %8lld %10.1f %10.1f %10.1f\n",
                  r.name.c_str(), r.nt, 100.0 * r.precision, 100.0 * r.recall,
                  100.0 * r.f1);
    os << buf;
  }
  return os.str();
}

}  // namespace spanmask
