// Copyright 2026 The gtrel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gtrel {

/// Label inventory of a dataset.
enum class Task {
  kNary5,           // five drug-gene-mutation response classes
  kNary2,           // the same data collapsed to yes/no
  kBinaryAbstract,  // abstract-level positive/negative pairs
};

std::string_view to_string(Task task);
Task parse_task(std::string_view name);
const std::vector<std::string>& task_labels(Task task);

/// Maps a five-class label to "yes"/"no": "none" is "no", everything else is
/// "yes". Anything outside the five-class set, including "yes" and "no"
/// themselves, is a label error.
std::string collapse_to_binary(std::string_view label);

/// Half-open token interval.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct Entity {
  std::string eid;                   // slot name, e.g. DRUG or CHEMICAL
  std::vector<std::string> kb_ids;   // may be empty
  std::vector<Span> mentions;
  /// Optional, parallel to `mentions`: the ID each mention was normalized to.
  /// An empty string marks a mention that applies to every ID.
  std::vector<std::string> mention_ids;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct DepArc {
  std::size_t head = 0;  // a root points at itself
  std::string label;

  friend bool operator==(const DepArc&, const DepArc&) = default;
};

struct RelationInstance {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<DepArc> dep;
  std::vector<Entity> entities;
  std::string label;
  Task task = Task::kNary2;
  /// Id of the record this one was expanded from; empty when not expanded.
  std::string source_id;

  std::vector<std::size_t> heads() const;
  const std::string& origin_id() const { return source_id.empty() ? id : source_id; }

  friend bool operator==(const RelationInstance&, const RelationInstance&) = default;
};

/// Checks every structural invariant; throws Error(kInstance / kGraph / kLabel).
void validate(const RelationInstance& inst);

}  // namespace gtrel
