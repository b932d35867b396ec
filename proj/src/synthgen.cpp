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

#include "spanmask/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spanmask/analysis.hpp"
#include "spanmask/rng.hpp"

namespace spanmask {

namespace {

using nlohmann::json;

// Argument surface inventories shared by all domains.
const std::vector<std::string> kCharacteristicWords = {"dull", "sharp",
                                                       "diffuse", "throbbing",
                                                       "achy"};
const std::vector<std::string> kAnatomyPhrases = {
    "chest",      "abdomen",       "back",       "throat",
    "left flank", "right shoulder", "chest wall", "lower back"};
const std::vector<std::string> kDurationNumbers = {"two", "three", "five", "ten"};
const std::vector<std::string> kDurationUnits = {"days", "weeks", "months"};
const std::vector<std::pair<std::string, Subtype>> kChangeWords = {
    {"worsened", Subtype::kWorsened},
    {"improved", Subtype::kImproved},
    {"resolved", Subtype::kResolved},
    {"unchanged", Subtype::kNoChange}};
const std::vector<std::pair<std::string, Subtype>> kSeverityWords = {
    {"mild", Subtype::kMild},
    {"moderate", Subtype::kModerate},
    {"severe", Subtype::kSevere}};
const std::vector<std::string> kFrequencyWords = {"occasional", "chronic",
                                                  "frequent", "intermittent"};

std::vector<std::string> split_template(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::set<std::string> builtin_argument_words() {
  std::set<std::string> words;
  for (const auto& w : kCharacteristicWords) words.insert(w);
  for (const auto& p : kAnatomyPhrases) {
    for (const auto& w : split_template(p)) words.insert(w);
  }
  for (const auto& w : kDurationNumbers) words.insert(w);
  for (const auto& w : kDurationUnits) words.insert(w);
  for (const auto& [w, s] : kChangeWords) words.insert(w);
  for (const auto& [w, s] : kSeverityWords) words.insert(w);
  for (const auto& w : kFrequencyWords) words.insert(w);
  for (const char* w : {"described", "as", "in", "the", "for", "now", "and", "."}) {
    words.insert(w);
  }
  return words;
}

// Sentence under construction: lowercase tokens plus exact gold.
struct SentenceDraft {
  std::vector<std::string> tokens;
  SentenceGold gold;
  int next_id = 0;

  int push(const std::string& token) {
    tokens.push_back(token);
    return static_cast<int>(tokens.size()) - 1;
  }

  void push_all(const std::vector<std::string>& words) {
    for (const auto& w : words) push(w);
  }

  int add_entity(EntityType type, std::optional<Subtype> subtype, int start,
                 int end) {
    Entity e;
    e.id = next_id++;
    e.type = type;
    e.subtype = subtype;
    e.span = {start, end};
    gold.entities.push_back(e);
    return e.id;
  }
};

template <typename T>
const T& weighted_pick(const std::vector<T>& items,
                       const std::function<double(const T&)>& weight,
                       rng::Stream& stream) {
  double total = 0.0;
  for (const auto& item : items) total += weight(item);
  double u = stream.next_unit() * total;
  for (const auto& item : items) {
    u -= weight(item);
    if (u < 0.0) return item;
  }
  return items.back();
}

const WeightedTemplate& pick_template(const std::vector<WeightedTemplate>& ts,
                                      rng::Stream& stream) {
  return weighted_pick<WeightedTemplate>(
      ts, [](const WeightedTemplate& t) { return t.weight; }, stream);
}

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) {
    cdf_.reserve(n);
    double acc = 0.0;
    for (std::size_t r = 1; r <= n; ++r) {
      acc += std::pow(static_cast<double>(r), -exponent);
      cdf_.push_back(acc);
    }
    for (double& c : cdf_) c /= acc;
  }

  std::size_t draw(rng::Stream& stream) const {
    const double u = stream.next_unit();
    return std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin();
  }

 private:
  std::vector<double> cdf_;
};

double arg_prob(const DomainSpec& spec, EntityType type) {
  auto it = spec.argument_prob.find(type);
  return it == spec.argument_prob.end() ? 0.0 : it->second;
}

// Appends one event (trigger + optional assertion + sampled arguments) to the
// draft from a template containing the {S} slot.
void emit_event(const DomainSpec& spec, const std::string& symptom,
                std::optional<Subtype> assertion, const WeightedTemplate& tmpl,
                SentenceDraft* draft, rng::Stream& stream) {
  const auto words = split_template(tmpl.text);
  const auto slot = std::find(words.begin(), words.end(), "{S}");
  draft->push_all({words.begin(), slot});

  // Pre-symptom modifiers.
  std::optional<std::pair<int, std::string>> frequency;  // (position, word)
  if (stream.next_unit() < arg_prob(spec, EntityType::kFrequency)) {
    const auto& w = kFrequencyWords[stream.next_below(kFrequencyWords.size())];
    frequency = {draft->push(w), w};
  }
  std::optional<std::pair<int, Subtype>> severity;
  if (stream.next_unit() < arg_prob(spec, EntityType::kSeverity)) {
    const auto& [w, sub] = kSeverityWords[stream.next_below(kSeverityWords.size())];
    severity = {draft->push(w), sub};
  }

  const int trig_pos = draft->push(symptom);
  const int trigger_id =
      draft->add_entity(EntityType::kTrigger, {}, trig_pos, trig_pos + 1);
  if (assertion) {
    // Normalized annotation: the Assertion span coincides with the trigger.
    const int assertion_id = draft->add_entity(
        EntityType::kAssertion, assertion, trig_pos, trig_pos + 1);
    draft->gold.relations.push_back({trigger_id, assertion_id});
  }
  if (frequency) {
    const int id = draft->add_entity(EntityType::kFrequency, {},
                                     frequency->first, frequency->first + 1);
    draft->gold.relations.push_back({trigger_id, id});
  }
  if (severity) {
    const int id = draft->add_entity(EntityType::kSeverity, severity->second,
                                     severity->first, severity->first + 1);
    draft->gold.relations.push_back({trigger_id, id});
  }

  // Post-symptom argument fragments.
  if (stream.next_unit() < arg_prob(spec, EntityType::kCharacteristics)) {
    draft->push_all({"described", "as"});
    const auto& w =
        kCharacteristicWords[stream.next_below(kCharacteristicWords.size())];
    const int pos = draft->push(w);
    const int id =
        draft->add_entity(EntityType::kCharacteristics, {}, pos, pos + 1);
    draft->gold.relations.push_back({trigger_id, id});
  }
  if (stream.next_unit() < arg_prob(spec, EntityType::kAnatomy)) {
    draft->push_all({"in", "the"});
    const auto& phrase =
        kAnatomyPhrases[stream.next_below(kAnatomyPhrases.size())];
    const int start = static_cast<int>(draft->tokens.size());
    draft->push_all(split_template(phrase));
    const int id = draft->add_entity(EntityType::kAnatomy, {}, start,
                                     static_cast<int>(draft->tokens.size()));
    draft->gold.relations.push_back({trigger_id, id});
  }
  if (stream.next_unit() < arg_prob(spec, EntityType::kDuration)) {
    const int start = draft->push("for");
    draft->push(kDurationNumbers[stream.next_below(kDurationNumbers.size())]);
    draft->push(kDurationUnits[stream.next_below(kDurationUnits.size())]);
    const int id =
        draft->add_entity(EntityType::kDuration, {}, start, start + 3);
    draft->gold.relations.push_back({trigger_id, id});
  }
  if (stream.next_unit() < arg_prob(spec, EntityType::kChange)) {
    draft->push("now");
    const auto& [w, sub] = kChangeWords[stream.next_below(kChangeWords.size())];
    const int pos = draft->push(w);
    const int id = draft->add_entity(EntityType::kChange, sub, pos, pos + 1);
    draft->gold.relations.push_back({trigger_id, id});
  }

  draft->push_all({slot + 1, words.end()});
}

// One event clause; assertion subtype (or unasserted) and its template are
// drawn from the spec.
void emit_random_event(const DomainSpec& spec, const std::string& symptom,
                       SentenceDraft* draft, rng::Stream& stream) {
  if (!spec.unasserted_templates.empty() &&
      stream.next_unit() < spec.unasserted_prob) {
    emit_event(spec, symptom, {}, pick_template(spec.unasserted_templates, stream),
               draft, stream);
    return;
  }
  struct Choice {
    Subtype subtype;
    const WeightedTemplate* tmpl;
  };
  std::vector<Choice> choices;
  std::vector<double> weights;
  for (const auto& [subtype, templates] : spec.assertion_templates) {
    for (const auto& t : templates) {
      choices.push_back({subtype, &t});
      weights.push_back(t.weight);
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  double u = stream.next_unit() * total;
  std::size_t pick = choices.size() - 1;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) {
      pick = i;
      break;
    }
  }
  emit_event(spec, symptom, choices[pick].subtype, *choices[pick].tmpl, draft,
             stream);
}

SentenceDraft generate_sentence(const DomainSpec& spec,
                                const ZipfSampler& zipf, rng::Stream& stream) {
  SentenceDraft draft;
  const std::string& symptom = spec.lexicon[zipf.draw(stream)];
  if (stream.next_unit() < spec.neg_prob_for(symptom)) {
    // Negative context: the symptom word appears but is not annotated.
    const bool ambiguous = !spec.ambiguous_negative_templates.empty() &&
                           stream.next_unit() < spec.ambiguous_negative_prob;
    const auto& tmpl = pick_template(
        ambiguous ? spec.ambiguous_negative_templates : spec.negative_templates,
        stream);
    for (const auto& w : split_template(tmpl.text)) {
      draft.push(w == "{S}" ? symptom : w);
    }
  } else {
    emit_random_event(spec, symptom, &draft, stream);
    if (stream.next_unit() < spec.second_event_prob) {
      const std::string& second = spec.lexicon[zipf.draw(stream)];
      if (stream.next_unit() >= spec.neg_prob_for(second)) {
        draft.push("and");
        emit_random_event(spec, second, &draft, stream);
      }
    }
  }
  draft.push(".");
  return draft;
}

// Assembles drafts into a document; sentences joined by `separator`, first
// letter of each sentence capitalized in the display text.
Document assemble_document(const std::string& id, const std::string& domain,
                           const std::vector<SentenceDraft>& drafts,
                           char separator, bool with_gold) {
  Document doc;
  doc.id = id;
  doc.domain = domain;
  for (std::size_t s = 0; s < drafts.size(); ++s) {
    if (s > 0) doc.text += separator;
    Sentence sent;
    for (std::size_t t = 0; t < drafts[s].tokens.size(); ++t) {
      if (t > 0) doc.text += ' ';
      std::string display = drafts[s].tokens[t];
      if (t == 0 && !display.empty()) {
        display[0] =
            static_cast<char>(std::toupper(static_cast<unsigned char>(display[0])));
      }
      Token tok;
      tok.char_range = {doc.text.size(), doc.text.size() + display.size()};
      tok.surface = drafts[s].tokens[t];
      doc.text += display;
      sent.tokens.push_back(std::move(tok));
    }
    if (with_gold) sent.gold = drafts[s].gold;
    doc.sentences.push_back(std::move(sent));
  }
  return doc;
}

}  // namespace

double DomainSpec::neg_prob_for(const std::string& word) const {
  auto it = negative_context_prob.find(word);
  return it == negative_context_prob.end() ? default_negative_context_prob
                                           : it->second;
}

void DomainSpec::check() const {
  if (lexicon.empty()) throw std::invalid_argument("lexicon must be nonempty");
  if (zipf_exponent <= 0.0) {
    throw std::invalid_argument("zipf_exponent must be positive");
  }
  if (sentences_per_document < 1) {
    throw std::invalid_argument("sentences_per_document must be >= 1");
  }
  auto check_prob = [](double p, const char* what) {
    if (p < 0.0 || p > 1.0) {
      throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
    }
  };
  check_prob(default_negative_context_prob, "default_negative_context_prob");
  for (const auto& [w, p] : negative_context_prob) {
    check_prob(p, "negative_context_prob");
  }
  check_prob(unasserted_prob, "unasserted_prob");
  check_prob(second_event_prob, "second_event_prob");
  for (const auto& [t, p] : argument_prob) check_prob(p, "argument_prob");

  std::set<std::string> lex(lexicon.begin(), lexicon.end());
  if (lex.size() != lexicon.size()) {
    throw std::invalid_argument("lexicon contains duplicates");
  }
  for (const auto& w : lexicon) {
    if (w.size() < 2 || w.find(' ') != std::string::npos) {
      throw std::invalid_argument("lexicon word '" + w +
                                  "' must be a single token of >= 2 chars");
    }
  }

  auto check_templates = [&lex](const std::vector<WeightedTemplate>& ts,
                                const char* what, bool need_slot) {
    for (const auto& t : ts) {
      if (t.weight <= 0.0) {
        throw std::invalid_argument(std::string(what) + ": weight must be > 0");
      }
      const auto words = split_template(t.text);
      const long slots = std::count(words.begin(), words.end(), "{S}");
      if (need_slot && slots != 1) {
        throw std::invalid_argument(std::string(what) + " template '" + t.text +
                                    "' needs exactly one {S} slot");
      }
      for (const auto& w : words) {
        if (w != "{S}" && lex.count(w)) {
          throw std::invalid_argument(std::string(what) + " template word '" +
                                      w + "' collides with the lexicon");
        }
      }
    }
  };
  if (assertion_templates.empty()) {
    throw std::invalid_argument("assertion_templates must be nonempty");
  }
  for (const auto& [subtype, ts] : assertion_templates) {
    if (subtype_owner(subtype) != EntityType::kAssertion) {
      throw std::invalid_argument("assertion_templates keyed by a non-Assertion subtype");
    }
    if (ts.empty()) throw std::invalid_argument("empty template group");
    check_templates(ts, "assertion", true);
  }
  check_templates(unasserted_templates, "unasserted", true);
  if (unasserted_prob > 0.0 && unasserted_templates.empty()) {
    throw std::invalid_argument("unasserted_prob > 0 requires unasserted_templates");
  }
  bool needs_negative = default_negative_context_prob > 0.0;
  for (const auto& [w, p] : negative_context_prob) needs_negative |= p > 0.0;
  if (needs_negative && negative_templates.empty()) {
    throw std::invalid_argument("negative context probability > 0 requires negative_templates");
  }
  check_templates(negative_templates, "negative", true);
  check_prob(ambiguous_negative_prob, "ambiguous_negative_prob");
  check_templates(ambiguous_negative_templates, "ambiguous negative", true);

  const auto builtins = builtin_argument_words();
  for (const auto& w : lexicon) {
    if (builtins.count(w)) {
      throw std::invalid_argument("lexicon word '" + w +
                                  "' collides with argument vocabulary");
    }
  }
}

GeneratedDomain generate_domain(const DomainSpec& spec, int n_sentences,
                                int n_unlabeled_documents) {
  spec.check();
  if (n_sentences <= 0) {
    throw std::invalid_argument("n_sentences must be > 0");
  }
  const ZipfSampler zipf(spec.lexicon.size(), spec.zipf_exponent);

  GeneratedDomain out;
  std::vector<SentenceDraft> batch;
  int doc_index = 0;
  for (int i = 0; i < n_sentences; ++i) {
    rng::Stream stream(rng::combine(spec.seed, rng::fnv1a("labeled"),
                                    static_cast<std::uint64_t>(i)));
    batch.push_back(generate_sentence(spec, zipf, stream));
    const bool flush = static_cast<int>(batch.size()) == spec.sentences_per_document ||
                       i + 1 == n_sentences;
    if (flush) {
      std::ostringstream id;
      id << spec.name << "-" << doc_index++;
      out.labeled.documents.push_back(
          assemble_document(id.str(), spec.name, batch, '\n', true));
      batch.clear();
    }
  }

  for (int j = 0; j < n_unlabeled_documents; ++j) {
    std::vector<SentenceDraft> drafts;
    for (int k = 0; k < spec.sentences_per_document; ++k) {
      rng::Stream stream(rng::combine(spec.seed, rng::fnv1a("unlabeled"),
                                      static_cast<std::uint64_t>(j),
                                      static_cast<std::uint64_t>(k)));
      drafts.push_back(generate_sentence(spec, zipf, stream));
    }
    std::ostringstream id;
    id << spec.name << "-u" << j;
    out.unlabeled.documents.push_back(
        assemble_document(id.str(), spec.name, drafts, ' ', false));
  }
  return out;
}

ShiftPair make_shift_pair(const DomainSpec& source_spec,
                          const DomainSpec& target_spec, int n_source,
                          int n_target, int n_unlabeled_each) {
  ShiftPair out;
  out.source = generate_domain(source_spec, n_source, n_unlabeled_each);
  out.target = generate_domain(target_spec, n_target, n_unlabeled_each);

  std::set<std::string> a(source_spec.lexicon.begin(), source_spec.lexicon.end());
  std::set<std::string> b(target_spec.lexicon.begin(), target_spec.lexicon.end());
  std::set<std::string> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::inserter(both, both.begin()));
  std::set<std::string> either;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::inserter(either, either.begin()));
  out.summary.lexicon_jaccard =
      either.empty() ? 0.0
                     : static_cast<double>(both.size()) / either.size();

  const auto coverage =
      trigger_coverage(out.source.labeled, out.target.labeled, 100);
  out.summary.target_coverage_at_100 =
      coverage.empty() ? 0.0 : coverage.back().target_coverage;

  double gap = 0.0;
  int counted = 0;
  for (const auto& w : both) {
    double src, tgt;
    try {
      src = positive_class_ratio(out.source.labeled, w);
      tgt = positive_class_ratio(out.target.labeled, w);
    } catch (const std::runtime_error&) {
      continue;  // word never sampled in one of the corpora
    }
    gap += std::fabs(src - tgt);
    ++counted;
  }
  out.summary.mean_ratio_gap = counted > 0 ? gap / counted : 0.0;
  return out;
}

// --- presets ------------------------------------------------------------------

namespace {

const std::vector<std::string> kBaseLexicon = {
    "pain",        "fatigue",      "nausea",      "cough",        "fever",
    "dizziness",   "headache",     "vomiting",    "chills",       "rash",
    "wheezing",    "cramping",     "bloating",    "sweats",       "insomnia",
    "anorexia",    "malaise",      "palpitations", "numbness",    "itching",
    "swelling",    "stiffness",    "tremor",      "weakness",     "diarrhea",
    "constipation", "heartburn",   "congestion",  "hoarseness",   "anxiety",
    "confusion",   "bruising",     "bleeding",    "soreness",     "tingling",
    "drowsiness",  "agitation",    "dyspnea",     "myalgia",      "pruritus"};

const std::vector<std::string> kTargetOnlyWords = {
    "lymphedema", "neuropathy", "mucositis", "dysuria",
    "nocturia",   "urgency",    "lethargy",  "hemoptysis"};

DomainSpec base_spec() {
  DomainSpec spec;
  spec.lexicon = kBaseLexicon;
  spec.zipf_exponent = 1.1;
  spec.assertion_templates[Subtype::kPresent] = {
      {"patient reports {S}", 1.2},
      {"patient notes {S}", 0.6},
      {"patient has {S}", 0.6},
      {"reports {S} today", 0.6}};
  spec.assertion_templates[Subtype::kAbsent] = {
      {"patient denies {S}", 1.2},
      {"no {S} reported", 0.6},
      {"denies any {S}", 0.6}};
  spec.assertion_templates[Subtype::kPossible] = {
      {"possible {S} noted", 1.2}, {"evaluation suggests {S}", 0.8}};
  spec.assertion_templates[Subtype::kConditional] = {
      {"{S} occurs with exertion", 1.0}, {"{S} flares when walking", 1.0}};
  spec.assertion_templates[Subtype::kHypothetical] = {
      {"monitor for {S}", 1.0}, {"return if {S} develops", 1.0}};
  spec.assertion_templates[Subtype::kNotPatient] = {
      {"family history of {S}", 1.0}, {"mother had {S}", 1.0}};
  spec.unasserted_templates = {{"{S} mentioned during visit", 1.0},
                               {"visit documents {S}", 1.0}};
  spec.negative_templates = {{"ros : {S} screening performed", 1.0},
                             {"{S} education material provided", 1.0},
                             {"discussed {S} management plan", 1.0},
                             {"screening checklist covers {S} items", 1.0}};
  spec.unasserted_prob = 0.03;
  spec.argument_prob = {{EntityType::kAnatomy, 0.30},
                        {EntityType::kCharacteristics, 0.18},
                        {EntityType::kDuration, 0.22},
                        {EntityType::kSeverity, 0.15},
                        {EntityType::kFrequency, 0.12},
                        {EntityType::kChange, 0.12}};
  spec.second_event_prob = 0.30;
  spec.sentences_per_document = 5;
  return spec;
}

}  // namespace

DomainSpec near_source_spec() {
  DomainSpec spec = base_spec();
  spec.name = "near-source";
  spec.default_negative_context_prob = 0.15;
  spec.seed = 101;
  return spec;
}

DomainSpec near_target_spec() {
  DomainSpec spec = base_spec();
  spec.name = "near-target";
  spec.default_negative_context_prob = 0.12;
  spec.seed = 202;
  return spec;
}

namespace {

// Source ranks whose words are overly associated with negative contexts in
// the far source while staying frequent, cleanly-annotated triggers in the
// far target.
constexpr int kFarBiasLo = 2;   // inclusive, 0-based rank
constexpr int kFarBiasHi = 12;  // exclusive

std::vector<WeightedTemplate> far_ambiguous_negatives() {
  return {{"patient reports {S} screening completed", 1.0},
          {"patient notes {S} history reviewed", 1.0},
          {"patient has {S} risk factors", 1.0},
          {"reports {S} education today", 1.0}};
}

DomainSpec far_argument_probs(DomainSpec spec) {
  spec.argument_prob = {{EntityType::kAnatomy, 0.22},
                        {EntityType::kCharacteristics, 0.13},
                        {EntityType::kDuration, 0.16},
                        {EntityType::kSeverity, 0.11},
                        {EntityType::kFrequency, 0.09},
                        {EntityType::kChange, 0.09}};
  return spec;
}

}  // namespace

DomainSpec far_source_spec() {
  DomainSpec spec = far_argument_probs(base_spec());
  spec.name = "far-source";
  // Mid-top source symptoms appear mostly in report-like negative contexts,
  // so their surface form becomes a misleading negative cue.
  spec.default_negative_context_prob = 0.12;
  for (int i = kFarBiasLo; i < kFarBiasHi; ++i) {
    spec.negative_context_prob[spec.lexicon[i]] = 0.60;
  }
  spec.ambiguous_negative_templates = far_ambiguous_negatives();
  spec.ambiguous_negative_prob = 0.60;
  spec.seed = 303;
  return spec;
}

DomainSpec far_target_spec() {
  DomainSpec spec = far_argument_probs(base_spec());
  spec.name = "far-target";
  // Target-only vocabulary claims the top ranks, the source's bias words stay
  // frequent, and the tail order reverses. Negative contexts are rare, so the
  // bias words are almost always clean triggers here.
  std::vector<std::string> lexicon;
  std::size_t bias = kFarBiasLo;
  for (const auto& w : kTargetOnlyWords) {
    lexicon.push_back(w);
    if (bias < kFarBiasHi) lexicon.push_back(kBaseLexicon[bias++]);
    if (bias < kFarBiasHi) lexicon.push_back(kBaseLexicon[bias++]);
  }
  lexicon.push_back(kBaseLexicon[0]);
  lexicon.push_back(kBaseLexicon[1]);
  for (int i = static_cast<int>(kBaseLexicon.size()) - 1; i >= kFarBiasHi; --i) {
    lexicon.push_back(kBaseLexicon[i]);
  }
  spec.lexicon = std::move(lexicon);
  spec.default_negative_context_prob = 0.05;
  spec.ambiguous_negative_templates = far_ambiguous_negatives();
  spec.ambiguous_negative_prob = 0.60;
  spec.seed = 404;
  return spec;
}

// --- spec (de)serialization -----------------------------------------------------

namespace {

json templates_to_json(const std::vector<WeightedTemplate>& ts) {
  json arr = json::array();
  for (const auto& t : ts) {
    arr.push_back({{"text", t.text}, {"weight", t.weight}});
  }
  return arr;
}

std::vector<WeightedTemplate> templates_from_json(const json& arr) {
  std::vector<WeightedTemplate> out;
  for (const auto& j : arr) {
    out.push_back({j.at("text").get<std::string>(),
                   j.value("weight", 1.0)});
  }
  return out;
}

}  // namespace

void save_domain_spec(const DomainSpec& spec, const std::string& path) {
  json j;
  j["name"] = spec.name;
  j["lexicon"] = spec.lexicon;
  j["zipf_exponent"] = spec.zipf_exponent;
  json templates;
  for (const auto& [subtype, ts] : spec.assertion_templates) {
    templates[subtype_name(subtype)] = templates_to_json(ts);
  }
  j["assertion_templates"] = std::move(templates);
  j["unasserted_templates"] = templates_to_json(spec.unasserted_templates);
  j["negative_templates"] = templates_to_json(spec.negative_templates);
  j["ambiguous_negative_templates"] =
      templates_to_json(spec.ambiguous_negative_templates);
  j["ambiguous_negative_prob"] = spec.ambiguous_negative_prob;
  j["default_negative_context_prob"] = spec.default_negative_context_prob;
  j["negative_context_prob"] = spec.negative_context_prob;
  j["unasserted_prob"] = spec.unasserted_prob;
  json arg_probs;
  for (const auto& [type, p] : spec.argument_prob) {
    arg_probs[entity_type_name(type)] = p;
  }
  j["argument_prob"] = std::move(arg_probs);
  j["second_event_prob"] = spec.second_event_prob;
  j["sentences_per_document"] = spec.sentences_per_document;
  j["seed"] = spec.seed;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write domain spec: " + path);
  out << j.dump(2) << "\n";
}

DomainSpec load_domain_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read domain spec: " + path);
  json j;
  in >> j;

  DomainSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.lexicon = j.at("lexicon").get<std::vector<std::string>>();
  spec.zipf_exponent = j.value("zipf_exponent", 1.1);
  for (const auto& [key, arr] : j.at("assertion_templates").items()) {
    auto subtype = subtype_from_name(key);
    if (!subtype) throw std::runtime_error("unknown subtype '" + key + "'");
    spec.assertion_templates[*subtype] = templates_from_json(arr);
  }
  if (j.contains("unasserted_templates")) {
    spec.unasserted_templates = templates_from_json(j.at("unasserted_templates"));
  }
  if (j.contains("negative_templates")) {
    spec.negative_templates = templates_from_json(j.at("negative_templates"));
  }
  if (j.contains("ambiguous_negative_templates")) {
    spec.ambiguous_negative_templates =
        templates_from_json(j.at("ambiguous_negative_templates"));
  }
  spec.ambiguous_negative_prob = j.value("ambiguous_negative_prob", 0.0);
  spec.default_negative_context_prob =
      j.value("default_negative_context_prob", 0.0);
  if (j.contains("negative_context_prob")) {
    spec.negative_context_prob =
        j.at("negative_context_prob").get<std::map<std::string, double>>();
  }
  spec.unasserted_prob = j.value("unasserted_prob", 0.0);
  if (j.contains("argument_prob")) {
    for (const auto& [key, p] : j.at("argument_prob").items()) {
      auto type = entity_type_from_name(key);
      if (!type) throw std::runtime_error("unknown entity type '" + key + "'");
      spec.argument_prob[*type] = p.get<double>();
    }
  }
  spec.second_event_prob = j.value("second_event_prob", 0.0);
  spec.sentences_per_document = j.value("sentences_per_document", 5);
  spec.seed = j.value("seed", 1ULL);
  spec.check();
  return spec;
}

void save_plain_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write text corpus: " + path);
  for (const auto& doc : corpus.documents) {
    if (doc.text.find('\n') != std::string::npos) {
      throw std::runtime_error("document '" + doc.id +
                               "' spans multiple lines; cannot save as plain text");
    }
    out << doc.domain << " " << doc.text << "\n";
  }
}

}  // namespace spanmask
