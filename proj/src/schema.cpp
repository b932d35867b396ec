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

#include "spanmask/schema.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>

namespace spanmask {

namespace {

const std::array<std::string, kNumEntityTypes> kTypeNames = {
    "SSx",     "Assertion",       "Change",   "Severity",
    "Anatomy", "Characteristics", "Duration", "Frequency"};

const std::array<std::string, 13> kSubtypeNames = {
    "present", "absent",   "possible", "conditional", "hypothetical",
    "not patient",
    "no change", "worsened", "improved", "resolved",
    "mild",     "moderate", "severe"};

}  // namespace

bool is_labeled_argument(EntityType t) {
  return t == EntityType::kAssertion || t == EntityType::kChange ||
         t == EntityType::kSeverity;
}

bool is_span_only_argument(EntityType t) {
  return t == EntityType::kAnatomy || t == EntityType::kCharacteristics ||
         t == EntityType::kDuration || t == EntityType::kFrequency;
}

EntityType subtype_owner(Subtype s) {
  int v = static_cast<int>(s);
  if (v < kNumAssertionSubtypes) return EntityType::kAssertion;
  if (v < kNumAssertionSubtypes + kNumChangeSubtypes) return EntityType::kChange;
  return EntityType::kSeverity;
}

const std::string& entity_type_name(EntityType t) {
  return kTypeNames[static_cast<int>(t)];
}

const std::string& subtype_name(Subtype s) {
  return kSubtypeNames[static_cast<int>(s)];
}

std::optional<EntityType> entity_type_from_name(const std::string& name) {
  for (int i = 0; i < kNumEntityTypes; ++i) {
    if (kTypeNames[i] == name) return static_cast<EntityType>(i);
  }
  return std::nullopt;
}

std::optional<Subtype> subtype_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kSubtypeNames.size(); ++i) {
    if (kSubtypeNames[i] == name) return static_cast<Subtype>(i);
  }
  return std::nullopt;
}

// --- merged label space -----------------------------------------------------

namespace {
constexpr int kAssertionBase = 2;                                   // 2..7
constexpr int kChangeBase = kAssertionBase + kNumAssertionSubtypes; // 8..11
constexpr int kSeverityBase = kChangeBase + kNumChangeSubtypes;     // 12..14
constexpr int kSpanOnlyBase = kSeverityBase + kNumSeveritySubtypes; // 15..18
static_assert(kSpanOnlyBase + 4 == kNumMergedLabels);
}  // namespace

int merged_trigger_label(std::optional<Subtype> assertion_subtype) {
  if (!assertion_subtype.has_value()) return kLabelUnassertedTrigger;
  if (subtype_owner(*assertion_subtype) != EntityType::kAssertion) {
    throw SchemaError("merged trigger label requires an Assertion subtype");
  }
  return kAssertionBase + static_cast<int>(*assertion_subtype);
}

int merged_argument_label(EntityType type, std::optional<Subtype> subtype) {
  switch (type) {
    case EntityType::kChange:
      if (!subtype || subtype_owner(*subtype) != type) {
        throw SchemaError("Change entity requires a Change subtype");
      }
      return kChangeBase + static_cast<int>(*subtype) - kNumAssertionSubtypes;
    case EntityType::kSeverity:
      if (!subtype || subtype_owner(*subtype) != type) {
        throw SchemaError("Severity entity requires a Severity subtype");
      }
      return kSeverityBase + static_cast<int>(*subtype) -
             kNumAssertionSubtypes - kNumChangeSubtypes;
    case EntityType::kAnatomy:
    case EntityType::kCharacteristics:
    case EntityType::kDuration:
    case EntityType::kFrequency:
      if (subtype) throw SchemaError("span-only argument carries no subtype");
      return kSpanOnlyBase + static_cast<int>(type) -
             static_cast<int>(EntityType::kAnatomy);
    default:
      throw SchemaError("not an argument type: " + entity_type_name(type));
  }
}

bool is_trigger_label(int label) {
  return label == kLabelUnassertedTrigger ||
         (label >= kAssertionBase && label < kAssertionBase + kNumAssertionSubtypes);
}

const std::string& merged_label_name(int label) {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n(kNumMergedLabels);
    n[kLabelNegative] = "none";
    n[kLabelUnassertedTrigger] = "SSx";
    for (int i = 0; i < kNumAssertionSubtypes; ++i) {
      n[kAssertionBase + i] =
          "SSx:" + subtype_name(static_cast<Subtype>(i));
    }
    for (int i = 0; i < kNumChangeSubtypes; ++i) {
      n[kChangeBase + i] =
          "Change:" + subtype_name(static_cast<Subtype>(kNumAssertionSubtypes + i));
    }
    for (int i = 0; i < kNumSeveritySubtypes; ++i) {
      n[kSeverityBase + i] =
          "Severity:" + subtype_name(static_cast<Subtype>(
                            kNumAssertionSubtypes + kNumChangeSubtypes + i));
    }
    for (int i = 0; i < 4; ++i) {
      n[kSpanOnlyBase + i] = entity_type_name(
          static_cast<EntityType>(static_cast<int>(EntityType::kAnatomy) + i));
    }
    return n;
  }();
  if (label < 0 || label >= kNumMergedLabels) {
    throw SchemaError("merged label out of range");
  }
  return names[label];
}

std::pair<EntityType, std::optional<Subtype>> unmerged_type(int label) {
  if (label == kLabelUnassertedTrigger) return {EntityType::kTrigger, {}};
  if (label >= kAssertionBase && label < kChangeBase) {
    return {EntityType::kAssertion,
            static_cast<Subtype>(label - kAssertionBase)};
  }
  if (label >= kChangeBase && label < kSeverityBase) {
    return {EntityType::kChange,
            static_cast<Subtype>(kNumAssertionSubtypes + label - kChangeBase)};
  }
  if (label >= kSeverityBase && label < kSpanOnlyBase) {
    return {EntityType::kSeverity,
            static_cast<Subtype>(kNumAssertionSubtypes + kNumChangeSubtypes +
                                 label - kSeverityBase)};
  }
  if (label >= kSpanOnlyBase && label < kNumMergedLabels) {
    return {static_cast<EntityType>(static_cast<int>(EntityType::kAnatomy) +
                                    label - kSpanOnlyBase),
            {}};
  }
  throw SchemaError("cannot unmerge label " + std::to_string(label));
}

// --- events / merge / unmerge ------------------------------------------------

std::vector<Event> group_events(const std::vector<Entity>& entities,
                                const std::vector<Relation>& relations) {
  std::map<int, const Entity*> by_id;
  for (const auto& e : entities) by_id[e.id] = &e;

  std::vector<Event> events;
  for (const auto& e : entities) {
    if (e.type != EntityType::kTrigger) continue;
    Event ev;
    ev.trigger = e;
    for (const auto& r : relations) {
      if (r.head != e.id) continue;
      auto it = by_id.find(r.tail);
      if (it == by_id.end()) {
        throw SchemaError("relation tail id " + std::to_string(r.tail) +
                          " not found");
      }
      ev.arguments.push_back(*it->second);
    }
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<MergedEntity> merge_assertion(const std::vector<Event>& events) {
  std::vector<MergedEntity> out;
  std::set<int> emitted_args;
  for (const auto& ev : events) {
    const Entity* assertion = nullptr;
    for (const auto& arg : ev.arguments) {
      if (arg.type != EntityType::kAssertion) continue;
      if (assertion != nullptr) {
        throw SchemaError("event with trigger id " +
                          std::to_string(ev.trigger.id) +
                          " has two Assertion arguments");
      }
      assertion = &arg;
    }
    MergedEntity trig;
    trig.id = ev.trigger.id;
    trig.span = ev.trigger.span;
    trig.label = merged_trigger_label(
        assertion ? assertion->subtype : std::optional<Subtype>{});
    out.push_back(trig);

    for (const auto& arg : ev.arguments) {
      if (arg.type == EntityType::kAssertion) continue;
      if (!emitted_args.insert(arg.id).second) continue;  // shared argument
      out.push_back(
          {arg.id, arg.span, merged_argument_label(arg.type, arg.subtype)});
    }
  }
  return out;
}

MergedAnnotation merge_annotation(const std::vector<Entity>& entities,
                                  const std::vector<Relation>& relations) {
  auto events = group_events(entities, relations);
  MergedAnnotation merged;
  merged.entities = merge_assertion(events);
  for (const auto& ev : events) {
    for (const auto& arg : ev.arguments) {
      if (arg.type == EntityType::kAssertion) continue;
      merged.relations.push_back({ev.trigger.id, arg.id});
    }
  }
  return merged;
}

Annotation unmerge_assertion(const std::vector<MergedEntity>& entities,
                             const std::vector<Relation>& relations) {
  Annotation out;
  int next_id = 0;
  for (const auto& e : entities) next_id = std::max(next_id, e.id + 1);

  for (const auto& e : entities) {
    if (e.label == kLabelNegative) {
      throw SchemaError("cannot unmerge the negative label");
    }
    if (is_trigger_label(e.label)) {
      out.entities.push_back({e.id, EntityType::kTrigger, {}, e.span});
      if (e.label != kLabelUnassertedTrigger) {
        auto [type, subtype] = unmerged_type(e.label);
        int assertion_id = next_id++;
        out.entities.push_back({assertion_id, type, subtype, e.span});
        out.relations.push_back({e.id, assertion_id});
      }
    } else {
      auto [type, subtype] = unmerged_type(e.label);
      out.entities.push_back({e.id, type, subtype, e.span});
    }
  }
  // Pass-through relations keep their ids: merged heads become SSx entities.
  for (const auto& r : relations) out.relations.push_back(r);
  return out;
}

bool has_errors(const std::vector<Violation>& violations) {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) {
                       return v.severity == Severity::kError;
                     });
}

std::string violation_to_string(const Violation& v) {
  std::ostringstream os;
  os << (v.severity == Severity::kError ? "error" : "warning") << " ["
     << v.rule << "] doc=" << v.document_id << " sentence=" << v.sentence_index
     << ": " << v.message;
  return os.str();
}

}  // namespace spanmask
