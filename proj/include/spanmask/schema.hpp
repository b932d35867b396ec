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

#ifndef SPANMASK_SCHEMA_HPP
#define SPANMASK_SCHEMA_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spanmask {

// Raised when input data breaks a type-system invariant (distinct from
// ordinary I/O or usage errors so the CLI can map it to its own exit code).
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Symptom-event entity inventory. SSx is the sole trigger type; Assertion,
// Change and Severity are labeled arguments (carry a subtype); Anatomy,
// Characteristics, Duration and Frequency are span-only arguments.
enum class EntityType {
  kTrigger,  // SSx
  kAssertion,
  kChange,
  kSeverity,
  kAnatomy,
  kCharacteristics,
  kDuration,
  kFrequency,
};
inline constexpr int kNumEntityTypes = 8;

enum class Subtype {
  // Assertion
  kPresent,
  kAbsent,
  kPossible,
  kConditional,
  kHypothetical,
  kNotPatient,
  // Change
  kNoChange,
  kWorsened,
  kImproved,
  kResolved,
  // Severity
  kMild,
  kModerate,
  kSevere,
};
inline constexpr int kNumAssertionSubtypes = 6;
inline constexpr int kNumChangeSubtypes = 4;
inline constexpr int kNumSeveritySubtypes = 3;

bool is_labeled_argument(EntityType t);
bool is_span_only_argument(EntityType t);
// The labeled-argument type a subtype belongs to.
EntityType subtype_owner(Subtype s);

const std::string& entity_type_name(EntityType t);   // "SSx", "Assertion", ...
const std::string& subtype_name(Subtype s);          // "present", "no change", ...
std::optional<EntityType> entity_type_from_name(const std::string& name);
std::optional<Subtype> subtype_from_name(const std::string& name);

// Token-index interval [start, end) within one sentence.
struct TokenSpan {
  int start = 0;
  int end = 0;

  int width() const { return end - start; }
  bool operator==(const TokenSpan&) const = default;
  auto operator<=>(const TokenSpan&) const = default;
};

struct Entity {
  int id = 0;
  EntityType type = EntityType::kTrigger;
  std::optional<Subtype> subtype;
  TokenSpan span;

  bool operator==(const Entity&) const = default;
};

// head must be a trigger, tail a non-trigger argument in the same sentence.
struct Relation {
  int head = 0;
  int tail = 0;

  bool operator==(const Relation&) const = default;
};

struct Event {
  Entity trigger;
  std::vector<Entity> arguments;
};

// ---------------------------------------------------------------------------
// Merged label space: the training representation in which each trigger
// carries its Assertion subtype on the trigger span.
//
//   0            negative (no entity)
//   1            trigger without an Assertion argument
//   2 .. 7       trigger merged with an Assertion subtype
//   8 .. 11      Change subtypes
//   12 .. 14     Severity subtypes
//   15 .. 18     span-only argument types
// ---------------------------------------------------------------------------
inline constexpr int kLabelNegative = 0;
inline constexpr int kLabelUnassertedTrigger = 1;
inline constexpr int kNumMergedLabels = 19;

int merged_trigger_label(std::optional<Subtype> assertion_subtype);
int merged_argument_label(EntityType type, std::optional<Subtype> subtype);
bool is_trigger_label(int label);
const std::string& merged_label_name(int label);
// Inverse of the argument/trigger mapping; negative label is not invertible.
std::pair<EntityType, std::optional<Subtype>> unmerged_type(int label);

struct MergedEntity {
  int id = 0;
  TokenSpan span;
  int label = kLabelNegative;

  bool operator==(const MergedEntity&) const = default;
};

struct MergedAnnotation {
  std::vector<MergedEntity> entities;
  std::vector<Relation> relations;  // merged-trigger id -> argument id
};

struct Annotation {
  std::vector<Entity> entities;
  std::vector<Relation> relations;
};

// Groups entities into events: one event per trigger, arguments attached via
// relations. Arguments may belong to several events; orphan arguments to none.
std::vector<Event> group_events(const std::vector<Entity>& entities,
                                const std::vector<Relation>& relations);

// Replaces each event's trigger/Assertion pair with a single entity on the
// trigger span carrying the Assertion subtype; assertion-less triggers get
// the unasserted-trigger label; other arguments pass through (deduplicated
// when shared between events). Throws SchemaError on a double Assertion.
std::vector<MergedEntity> merge_assertion(const std::vector<Event>& events);

// merge_assertion plus the merged relations (trigger -> non-Assertion
// argument), convenient for building training samples.
MergedAnnotation merge_annotation(const std::vector<Entity>& entities,
                                  const std::vector<Relation>& relations);

// Splits every Assertion-merged entity back into a trigger and an Assertion
// entity over the same span, linked by a new relation. Total on valid input.
Annotation unmerge_assertion(const std::vector<MergedEntity>& entities,
                             const std::vector<Relation>& relations);

enum class Severity { kError, kWarning };

struct Violation {
  std::string document_id;
  int sentence_index = 0;
  std::string rule;
  std::string message;
  Severity severity = Severity::kError;
};

bool has_errors(const std::vector<Violation>& violations);
std::string violation_to_string(const Violation& v);

}  // namespace spanmask

#endif  // SPANMASK_SCHEMA_HPP
