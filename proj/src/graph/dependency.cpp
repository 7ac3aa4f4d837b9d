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

#include "gtrel/graph/dependency.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <sstream>

#include "gtrel/error.hpp"

namespace gtrel {
namespace {

constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

void connect(std::vector<std::vector<std::size_t>>& adj, std::size_t a, std::size_t b) {
  if (a == b) return;
  adj[a].push_back(b);
  adj[b].push_back(a);
}

}  // namespace

DependencyGraph DependencyGraph::from_heads(std::span<const std::size_t> heads, bool link_roots) {
  const std::size_t n = heads.size();
  DependencyGraph g;
  g.adjacency_.assign(n, {});
  g.sentence_.assign(n, kUnreached);

  // Resolve every token to its root, detecting rootless cycles.
  std::vector<std::size_t> root_of(n, kUnreached);
  for (std::size_t i = 0; i < n; ++i) {
    if (heads[i] >= n) {
      fail(ErrorKind::kGraph, "head " + std::to_string(heads[i]) + " of token " + std::to_string(i) +
                                  " is out of range");
    }
    std::vector<std::size_t> chain;
    std::size_t cur = i;
    while (root_of[cur] == kUnreached && heads[cur] != cur) {
      chain.push_back(cur);
      if (chain.size() > n) {
        fail(ErrorKind::kGraph, "dependency heads of token " + std::to_string(i) +
                                    " form a cycle with no root");
      }
      cur = heads[cur];
    }
    const std::size_t root = root_of[cur] != kUnreached ? root_of[cur] : cur;
    root_of[cur] = root;
    for (std::size_t t : chain) root_of[t] = root;
  }

  // Sentences are ordered by their first token.
  std::vector<std::size_t> sentence_of_root(n, kUnreached);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = root_of[i];
    if (sentence_of_root[r] == kUnreached) {
      sentence_of_root[r] = g.roots_.size();
      g.roots_.push_back(r);
    }
    g.sentence_[i] = sentence_of_root[r];
  }

  for (std::size_t i = 0; i < n; ++i) connect(g.adjacency_, i, heads[i]);
  if (link_roots) {
    for (std::size_t s = 1; s < g.roots_.size(); ++s) connect(g.adjacency_, g.roots_[s - 1], g.roots_[s]);
  }
  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

std::vector<std::size_t> DependencyGraph::distances_from(std::size_t source) const {
  std::vector<std::size_t> dist(size(), kUnreached);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adjacency_[u]) {
      if (dist[v] == kUnreached) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::vector<std::size_t> shortest_path(const DependencyGraph& graph, std::size_t src, std::size_t dst) {
  const std::size_t n = graph.size();
  if (src >= n || dst >= n) {
    fail(ErrorKind::kIndex, "shortest_path endpoint outside a " + std::to_string(n) + "-token graph");
  }
  // Distances to dst, then a greedy walk from src taking the smallest
  // neighbor that moves one hop closer: the lexicographically least path.
  const std::vector<std::size_t> to_dst = graph.distances_from(dst);
  if (to_dst[src] == kUnreached) {
    std::ostringstream msg;
    msg << "tokens " << src << " and " << dst << " are disconnected; components:";
    std::vector<std::size_t> seen(n, 0);
    for (std::size_t start = 0; start < n; ++start) {
      if (seen[start]) continue;
      const auto d = graph.distances_from(start);
      msg << " {";
      bool first = true;
      for (std::size_t t = 0; t < n; ++t) {
        if (d[t] == kUnreached) continue;
        seen[t] = 1;
        msg << (first ? "" : ",") << t;
        first = false;
      }
      msg << '}';
    }
    fail(ErrorKind::kPath, msg.str());
  }
  std::vector<std::size_t> path{src};
  std::size_t cur = src;
  while (cur != dst) {
    for (std::size_t next : graph.adjacency()[cur]) {
      if (to_dst[next] + 1 == to_dst[cur]) {
        cur = next;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

std::vector<std::size_t> shortest_path(std::span<const std::size_t> heads, std::size_t src, std::size_t dst) {
  return shortest_path(DependencyGraph::from_heads(heads), src, dst);
}

std::vector<std::size_t> mention_path(const DependencyGraph& graph, Span from, Span to) {
  std::vector<std::size_t> best;
  for (std::size_t a = from.begin; a < from.end; ++a) {
    for (std::size_t b = to.begin; b < to.end; ++b) {
      std::vector<std::size_t> p = shortest_path(graph, a, b);
      if (best.empty() || p.size() < best.size() || (p.size() == best.size() && p < best)) {
        best = std::move(p);
      }
    }
  }
  return best;
}

bool single_sentence(const RelationInstance& inst) {
  if (inst.tokens.empty()) return true;
  const auto heads = inst.heads();
  const DependencyGraph g = DependencyGraph::from_heads(heads, false);
  std::size_t sentence = kUnreached;
  for (const Entity& e : inst.entities) {
    for (const Span& s : e.mentions) {
      for (std::size_t t = s.begin; t < s.end; ++t) {
        if (sentence == kUnreached) sentence = g.sentence_of()[t];
        if (g.sentence_of()[t] != sentence) return false;
      }
    }
  }
  return true;
}

}  // namespace gtrel
