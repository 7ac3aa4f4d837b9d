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
#include <optional>
#include <vector>

#include "gtrel/attention.hpp"
#include "gtrel/graph/instance.hpp"

namespace gtrel {

/// Per-token neighbor sets (sorted, always containing the token itself).
struct NeighborGraph {
  std::vector<std::vector<std::size_t>> neighbors;

  std::size_t size() const noexcept { return neighbors.size(); }
  std::size_t max_set_size() const noexcept;
  NeighborMask to_mask() const;

  friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;
};

/// Neighbor rule for token i, in priority order: i itself, its headword, the
/// sequence-adjacent tokens i-1 and i+1, and, for tokens inside an entity
/// mention, every token on the dependency shortest path from that mention to
/// each mention of every other entity (nearer path tokens first). With a cap,
/// each set keeps its highest-priority members.
NeighborGraph build_neighbors(const RelationInstance& inst,
                              std::optional<std::size_t> max_neighbors = std::nullopt);

/// Splits every entity with several KB IDs into one instance per ID
/// (Cartesian product across entities). Entities with zero or one ID are
/// carried through unchanged.
std::vector<RelationInstance> expand_entities(const RelationInstance& inst);

}  // namespace gtrel
