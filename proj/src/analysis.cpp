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

#include "spanmask/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

namespace spanmask {

namespace {

std::map<std::string, long long> trigger_surface_counts(const Corpus& corpus) {
  std::map<std::string, long long> counts;
  for (const auto& doc : corpus.documents) {
    for (const auto& sent : doc.sentences) {
      if (!sent.gold) continue;
      for (const auto& e : sent.gold->entities) {
        if (e.type == EntityType::kTrigger) ++counts[span_surface(sent, e.span)];
      }
    }
  }
  return counts;
}

std::vector<std::pair<std::string, long long>> by_frequency(
    const std::map<std::string, long long>& counts) {
  std::vector<std::pair<std::string, long long>> v(counts.begin(), counts.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return v;
}

long long total(const std::map<std::string, long long>& counts) {
  long long t = 0;
  for (const auto& [s, c] : counts) t += c;
  return t;
}

struct RatioCounts {
  long long occurrences = 0;
  long long positives = 0;
};

RatioCounts ratio_counts(const Corpus& corpus, const std::string& phrase) {
  RatioCounts rc;
  for (const auto& doc : corpus.documents) {
    for (const auto& sent : doc.sentences) {
      std::set<int> trigger_starts;  // single-token trigger spans
      if (sent.gold) {
        for (const auto& e : sent.gold->entities) {
          if (e.type == EntityType::kTrigger && e.span.width() == 1) {
            trigger_starts.insert(e.span.start);
          }
        }
      }
      for (std::size_t t = 0; t < sent.tokens.size(); ++t) {
        if (sent.tokens[t].surface != phrase) continue;
        ++rc.occurrences;
        if (trigger_starts.count(static_cast<int>(t))) ++rc.positives;
      }
    }
  }
  return rc;
}

bool single_token_phrase(const std::string& s) {
  if (s.size() < 2 || s.find(' ') != std::string::npos) return false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) return true;
  }
  return false;
}

// False negatives for exact trigger matching restricted to gold triggers with
// the given surface.
long long phrase_false_negatives(const Corpus& gold, const Corpus& pred,
                                 const std::string& phrase) {
  long long fn = 0;
  for (std::size_t d = 0; d < gold.documents.size(); ++d) {
    const auto& gdoc = gold.documents[d];
    const auto& pdoc = pred.documents[d];
    for (std::size_t s = 0; s < gdoc.sentences.size(); ++s) {
      const auto& gsent = gdoc.sentences[s];
      const auto& psent = pdoc.sentences[s];
      if (!gsent.gold) continue;
      std::map<TokenSpan, long long> gold_spans;
      for (const auto& e : gsent.gold->entities) {
        if (e.type == EntityType::kTrigger &&
            span_surface(gsent, e.span) == phrase) {
          ++gold_spans[e.span];
        }
      }
      if (gold_spans.empty()) continue;
      std::map<TokenSpan, long long> pred_spans;
      if (psent.gold) {
        for (const auto& e : psent.gold->entities) {
          if (e.type == EntityType::kTrigger) ++pred_spans[e.span];
        }
      }
      for (const auto& [span, g] : gold_spans) {
        auto it = pred_spans.find(span);
        const long long p = it == pred_spans.end() ? 0 : it->second;
        fn += std::max(0LL, g - p);
      }
    }
  }
  return fn;
}

void check_same_shape(const Corpus& a, const Corpus& b, const char* what) {
  if (a.documents.size() != b.documents.size()) {
    throw std::runtime_error(std::string(what) + ": document counts differ");
  }
  for (std::size_t d = 0; d < a.documents.size(); ++d) {
    if (a.documents[d].id != b.documents[d].id ||
        a.documents[d].sentences.size() != b.documents[d].sentences.size()) {
      throw std::runtime_error(std::string(what) + ": sentence sets differ");
    }
  }
}

}  // namespace

std::vector<CoveragePoint> trigger_coverage(const Corpus& source,
                                            const Corpus& target, int top_n) {
  const auto source_counts = trigger_surface_counts(source);
  const auto target_counts = trigger_surface_counts(target);
  if (source_counts.empty() || target_counts.empty()) {
    throw std::runtime_error("trigger_coverage requires gold triggers on both sides");
  }
  const auto ranked = by_frequency(source_counts);
  const double source_total = static_cast<double>(total(source_counts));
  const double target_total = static_cast<double>(total(target_counts));

  std::vector<CoveragePoint> out;
  long long cum_source = 0;
  long long cum_target = 0;
  const int k_max = std::min<int>(top_n, static_cast<int>(ranked.size()));
  for (int k = 0; k < k_max; ++k) {
    const auto& [phrase, count] = ranked[k];
    cum_source += count;
    auto it = target_counts.find(phrase);
    if (it != target_counts.end()) cum_target += it->second;
    CoveragePoint p;
    p.rank = k + 1;
    p.phrase = phrase;
    p.source_coverage = cum_source / source_total;
    p.target_coverage = cum_target / target_total;
    out.push_back(std::move(p));
  }
  return out;
}

double positive_class_ratio(const Corpus& corpus, const std::string& phrase) {
  const RatioCounts rc = ratio_counts(corpus, phrase);
  if (rc.occurrences == 0) {
    throw std::runtime_error("phrase '" + phrase + "' does not occur in corpus");
  }
  return static_cast<double>(rc.positives) / static_cast<double>(rc.occurrences);
}

std::vector<FnChangeEntry> fn_change(const Corpus& gold,
                                     const Corpus& preds_baseline,
                                     const Corpus& preds_masked, int top_n) {
  check_same_shape(gold, preds_baseline, "fn_change baseline");
  check_same_shape(gold, preds_masked, "fn_change masked");

  auto ranked = by_frequency(trigger_surface_counts(gold));
  std::erase_if(ranked,
                [](const auto& p) { return !single_token_phrase(p.first); });
  if (static_cast<int>(ranked.size()) > top_n) ranked.resize(top_n);

  std::vector<FnChangeEntry> out;
  for (const auto& [phrase, count] : ranked) {
    FnChangeEntry e;
    e.phrase = phrase;
    e.gold_count = count;
    e.fn_baseline = phrase_false_negatives(gold, preds_baseline, phrase);
    e.fn_masked = phrase_false_negatives(gold, preds_masked, phrase);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ScatterRow> scatter_data(const Corpus& source, const Corpus& target,
                                     const std::vector<FnChangeEntry>& changes) {
  std::vector<ScatterRow> rows;
  for (const auto& change : changes) {
    ScatterRow row;
    row.phrase = change.phrase;
    const RatioCounts src = ratio_counts(source, change.phrase);
    const RatioCounts tgt = ratio_counts(target, change.phrase);
    row.source_ratio =
        src.occurrences == 0
            ? 0.0
            : static_cast<double>(src.positives) / src.occurrences;
    row.target_ratio =
        tgt.occurrences == 0
            ? 0.0
            : static_cast<double>(tgt.positives) / tgt.occurrences;
    row.delta_fn = change.delta();
    row.above_diagonal = row.target_ratio > row.source_ratio;
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- file output -------------------------------------------------------------

void write_coverage_csv(const std::string& path,
                        const std::vector<CoveragePoint>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write coverage csv: " + path);
  out << "rank,phrase,source_coverage,target_coverage\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f\n", p.rank,
                  p.phrase.c_str(), p.source_coverage, p.target_coverage);
    out << buf;
  }
}

namespace {

constexpr int kSvgSize = 440;
constexpr int kSvgMargin = 50;
constexpr int kSvgPlot = kSvgSize - 2 * kSvgMargin;

double svg_x(double unit) { return kSvgMargin + unit * kSvgPlot; }
double svg_y(double unit) { return kSvgSize - kSvgMargin - unit * kSvgPlot; }

void svg_header(std::ofstream& out) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
      << kSvgSize << "\" height=\"" << kSvgSize << "\">\n"
      << "<rect width=\"" << kSvgSize << "\" height=\"" << kSvgSize
      << "\" fill=\"white\"/>\n";
}

void svg_axes(std::ofstream& out, const char* x_label, const char* y_label) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                svg_x(0), svg_y(0), svg_x(1), svg_y(0));
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                svg_x(0), svg_y(0), svg_x(0), svg_y(1));
  out << buf;
  for (int i = 0; i <= 5; ++i) {
    const double u = i / 5.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" "
                  "text-anchor=\"middle\">%.1f</text>\n",
                  svg_x(u), svg_y(0) + 16, u);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" "
                  "text-anchor=\"end\">%.1f</text>\n",
                  svg_x(0) - 6, svg_y(u) + 3, u);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%d\" font-size=\"11\" "
                "text-anchor=\"middle\">%s</text>\n",
                svg_x(0.5), kSvgSize - 10, x_label);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"14\" y=\"%.1f\" font-size=\"11\" "
                "text-anchor=\"middle\" transform=\"rotate(-90 14 %.1f)\">%s"
                "</text>\n",
                svg_y(0.5), svg_y(0.5), y_label);
  out << buf;
}

}  // namespace

void write_coverage_svg(const std::string& path,
                        const std::vector<CoveragePoint>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write coverage svg: " + path);
  svg_header(out);
  svg_axes(out, "rank / max rank", "cumulative trigger coverage");
  const double max_rank =
      points.empty() ? 1.0 : static_cast<double>(points.back().rank);
  char buf[128];
  for (int series = 0; series < 2; ++series) {
    out << "<polyline fill=\"none\" stroke=\""
        << (series == 0 ? "#1f77b4" : "#ff7f0e") << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : points) {
      const double cov = series == 0 ? p.source_coverage : p.target_coverage;
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", svg_x(p.rank / max_rank),
                    svg_y(cov));
      out << buf;
    }
    out << "\"/>\n";
  }
  out << "<text x=\"" << kSvgMargin + 8 << "\" y=\"" << kSvgMargin
      << "\" font-size=\"11\" fill=\"#1f77b4\">source</text>\n";
  out << "<text x=\"" << kSvgMargin + 8 << "\" y=\"" << kSvgMargin + 14
      << "\" font-size=\"11\" fill=\"#ff7f0e\">target</text>\n";
  out << "</svg>\n";
}

void write_scatter_csv(const std::string& path,
                       const std::vector<ScatterRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scatter csv: " + path);
  out << "phrase,source_ratio,target_ratio,delta_fn,above_diagonal\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%lld,%d\n", r.phrase.c_str(),
                  r.source_ratio, r.target_ratio, r.delta_fn,
                  r.above_diagonal ? 1 : 0);
    out << buf;
  }
}

void write_scatter_svg(const std::string& path,
                       const std::vector<ScatterRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scatter svg: " + path);
  svg_header(out);
  svg_axes(out, "positive class ratio (source)", "positive class ratio (target)");
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
                svg_x(0), svg_y(0), svg_x(1), svg_y(1));
  out << buf;
  long long max_abs = 1;
  for (const auto& r : rows) max_abs = std::max(max_abs, std::llabs(r.delta_fn));
  for (const auto& r : rows) {
    // Area proportional to |delta FN|.
    const double radius =
        2.0 + 10.0 * std::sqrt(static_cast<double>(std::llabs(r.delta_fn)) /
                               static_cast<double>(max_abs));
    const char* color = r.delta_fn < 0 ? "#d62728" : "#1f77b4";
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"%.1f\" fill=\"%s\" "
                  "fill-opacity=\"0.6\"><title>%s</title></circle>\n",
                  svg_x(r.source_ratio), svg_y(r.target_ratio), radius, color,
                  r.phrase.c_str());
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace spanmask
