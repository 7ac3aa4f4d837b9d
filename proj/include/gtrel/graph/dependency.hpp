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
#include <span>
#include <vector>

#include "gtrel/graph/instance.hpp"

namespace gtrel {

/// Undirected view of a dependency forest. Each root (head == self) starts a
/// sentence; with `link_roots` consecutive sentence roots are joined so every
/// pair of tokens is connected.
class DependencyGraph {
 public:
  /// Throws Error(kGraph) for out-of-range heads or tokens whose head chain
  /// never reaches a root.
  static DependencyGraph from_heads(std::span<const std::size_t> heads, bool link_roots = true);

  std::size_t size() const noexcept { return adjacency_.size(); }
  /// Sorted neighbor lists.
  const std::vector<std::vector<std::size_t>>& adjacency() const noexcept { return adjacency_; }
  /// Roots in sentence order (sentences ordered by their first token).
  const std::vector<std::size_t>& roots() const noexcept { return roots_; }
  /// Sentence index of every token.
  const std::vector<std::size_t>& sentence_of() const noexcept { return sentence_; }

  /// Hop counts from `source`; unreachable tokens get SIZE_MAX.
  std::vector<std::size_t> distances_from(std::size_t source) const;

 private:
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::size_t> roots_;
  std::vector<std::size_t> sentence_;
};

/// Minimal undirected path from src to dst, endpoints included. Among equal
/// length paths the lexicographically smallest index sequence wins. Throws
/// Error(kPath) listing the components when src and dst are disconnected.
std::vector<std::size_t> shortest_path(const DependencyGraph& graph, std::size_t src, std::size_t dst);
std::vector<std::size_t> shortest_path(std::span<const std::size_t> heads, std::size_t src, std::size_t dst);

/// Shortest path between two mentions: minimal over all token pairs, ties by
/// lexicographic order of the sequence, oriented from `from` to `to`.
std::vector<std::size_t> mention_path(const DependencyGraph& graph, Span from, Span to);

/// True when every mention of every entity lies in one sentence.
bool single_sentence(const RelationInstance& inst);

}  // namespace gtrel
