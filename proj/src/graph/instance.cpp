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

#include "gtrel/graph/instance.hpp"

#include <algorithm>
#include <set>

#include "gtrel/error.hpp"
#include "gtrel/graph/dependency.hpp"

namespace gtrel {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kNary5: return "nary5";
    case Task::kNary2: return "nary2";
    case Task::kBinaryAbstract: return "binary_abs";
  }
  return "nary2";
}

Task parse_task(std::string_view name) {
  if (name == "nary5") return Task::kNary5;
  if (name == "nary2") return Task::kNary2;
  if (name == "binary_abs") return Task::kBinaryAbstract;
  fail(ErrorKind::kConfig, "unknown task '" + std::string(name) + "'");
}

const std::vector<std::string>& task_labels(Task task) {
  static const std::vector<std::string> five = {"resistance or nonresponse", "sensitivity", "response",
                                                "resistance", "none"};
  static const std::vector<std::string> two = {"yes", "no"};
  static const std::vector<std::string> abstract = {"positive", "negative"};
  switch (task) {
    case Task::kNary5: return five;
    case Task::kNary2: return two;
    case Task::kBinaryAbstract: return abstract;
  }
  return two;
}

std::string collapse_to_binary(std::string_view label) {
  const auto& five = task_labels(Task::kNary5);
  if (std::find(five.begin(), five.end(), label) == five.end()) {
    fail(ErrorKind::kLabel, "cannot collapse label '" + std::string(label) +
                                "': not one of the five n-ary classes");
  }
  return label == "none" ? "no" : "yes";
}

std::vector<std::size_t> RelationInstance::heads() const {
  std::vector<std::size_t> out;
  out.reserve(dep.size());
  for (const DepArc& arc : dep) out.push_back(arc.head);
  return out;
}

void validate(const RelationInstance& inst) {
  const std::size_t n = inst.tokens.size();
  if (inst.dep.size() != n) {
    fail(ErrorKind::kInstance, inst.id + ": " + std::to_string(inst.dep.size()) +
                                   " dependency arcs for " + std::to_string(n) + " tokens");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (inst.dep[i].head >= n) {
      fail(ErrorKind::kGraph, inst.id + ": head of token " + std::to_string(i) + " is out of range");
    }
  }
  if (n > 0) {
    const auto heads = inst.heads();
    DependencyGraph::from_heads(heads);  // throws on rootless cycles
  }

  const auto& labels = task_labels(inst.task);
  if (std::find(labels.begin(), labels.end(), inst.label) == labels.end()) {
    fail(ErrorKind::kLabel, inst.id + ": label '" + inst.label + "' is not valid for task " +
                                std::string(to_string(inst.task)));
  }

  std::set<std::string> slots;
  std::vector<Span> all_spans;
  for (const Entity& e : inst.entities) {
    if (!slots.insert(e.eid).second) {
      fail(ErrorKind::kInstance, inst.id + ": entity slot " + e.eid + " appears twice");
    }
    if (e.mentions.empty()) fail(ErrorKind::kInstance, inst.id + ": entity " + e.eid + " has no mentions");
    if (!e.mention_ids.empty() && e.mention_ids.size() != e.mentions.size()) {
      fail(ErrorKind::kInstance, inst.id + ": entity " + e.eid + " mention_ids length mismatch");
    }
    for (std::size_t m = 0; m < e.mentions.size(); ++m) {
      const Span s = e.mentions[m];
      if (s.begin >= s.end || s.end > n) {
        fail(ErrorKind::kInstance, inst.id + ": entity " + e.eid + " mention [" + std::to_string(s.begin) +
                                       "," + std::to_string(s.end) + ") is empty or out of range");
      }
      if (m > 0 && e.mentions[m - 1].end > s.begin) {
        fail(ErrorKind::kInstance, inst.id + ": entity " + e.eid + " mentions are not sorted and disjoint");
      }
      all_spans.push_back(s);
    }
  }
  std::sort(all_spans.begin(), all_spans.end());
  for (std::size_t i = 1; i < all_spans.size(); ++i) {
    if (all_spans[i - 1].end > all_spans[i].begin) {
      fail(ErrorKind::kInstance, inst.id + ": mentions of different entities overlap");
    }
  }
}

}  // namespace gtrel
