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

#include "gtrel/graph/neighbors.hpp"

#include <algorithm>
#include <utility>

#include "gtrel/error.hpp"
#include "gtrel/graph/dependency.hpp"

namespace gtrel {

std::size_t NeighborGraph::max_set_size() const noexcept {
  std::size_t best = 0;
  for (const auto& set : neighbors) best = std::max(best, set.size());
  return best;
}

NeighborMask NeighborGraph::to_mask() const { return NeighborMask::from_sets(neighbors); }

NeighborGraph build_neighbors(const RelationInstance& inst, std::optional<std::size_t> max_neighbors) {
  if (max_neighbors && *max_neighbors == 0) fail(ErrorKind::kConfig, "neighbor cap must be positive");
  const std::size_t n = inst.tokens.size();
  const std::vector<std::size_t> heads = inst.heads();
  const DependencyGraph graph = DependencyGraph::from_heads(heads);

  // Path candidates per token, keyed by (hops from the owning mention, index).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> path_tokens(n);
  for (const Entity& entity : inst.entities) {
    for (const Span& mention : entity.mentions) {
      for (const Entity& other : inst.entities) {
        if (other.eid == entity.eid) continue;
        for (const Span& target : other.mentions) {
          const std::vector<std::size_t> path = mention_path(graph, mention, target);
          for (std::size_t t = mention.begin; t < mention.end; ++t) {
            for (std::size_t hop = 0; hop < path.size(); ++hop) path_tokens[t].emplace_back(hop, path[hop]);
          }
        }
      }
    }
  }

  NeighborGraph out;
  out.neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> ordered{i, heads[i]};
    if (i > 0) ordered.push_back(i - 1);
    if (i + 1 < n) ordered.push_back(i + 1);
    auto& extra = path_tokens[i];
    std::sort(extra.begin(), extra.end());
    for (const auto& [hop, token] : extra) ordered.push_back(token);

    std::vector<std::size_t> kept;
    for (std::size_t t : ordered) {
      if (max_neighbors && kept.size() == *max_neighbors) break;
      if (std::find(kept.begin(), kept.end(), t) == kept.end()) kept.push_back(t);
    }
    std::sort(kept.begin(), kept.end());
    out.neighbors[i] = std::move(kept);
  }
  return out;
}

std::vector<RelationInstance> expand_entities(const RelationInstance& inst) {
  std::vector<RelationInstance> out{inst};
  for (std::size_t e = 0; e < inst.entities.size(); ++e) {
    const Entity& entity = inst.entities[e];
    if (entity.kb_ids.size() <= 1) continue;
    std::vector<RelationInstance> next;
    next.reserve(out.size() * entity.kb_ids.size());
    for (const RelationInstance& partial : out) {
      for (const std::string& kb : entity.kb_ids) {
        RelationInstance copy = partial;
        Entity& slot = copy.entities[e];
        slot.kb_ids = {kb};
        if (!entity.mention_ids.empty()) {
          Entity narrowed = slot;
          narrowed.mentions.clear();
          narrowed.mention_ids.clear();
          for (std::size_t m = 0; m < entity.mentions.size(); ++m) {
            if (entity.mention_ids[m].empty() || entity.mention_ids[m] == kb) {
              narrowed.mentions.push_back(entity.mentions[m]);
              narrowed.mention_ids.push_back(entity.mention_ids[m]);
            }
          }
          // An ID with no dedicated mention keeps every mention.
          if (!narrowed.mentions.empty()) slot = std::move(narrowed);
        }
        next.push_back(std::move(copy));
      }
    }
    out = std::move(next);
  }
  if (out.size() > 1) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k].source_id = inst.origin_id();
      out[k].id = inst.id + "#" + std::to_string(k);
    }
  }
  return out;
}

}  // namespace gtrel
