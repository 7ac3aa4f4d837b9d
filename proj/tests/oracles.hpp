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

// Test-only reference implementations. None of these call into the library
// code paths they are used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gtrel/attention.hpp"
#include "gtrel/encoders.hpp"
#include "gtrel/graph/instance.hpp"
#include "gtrel/numerics/rng.hpp"

namespace gtrel::oracle {

inline constexpr std::size_t kFar = std::numeric_limits<std::size_t>::max() / 4;

/// Random dependency forest: `sentences` consecutive blocks, each a random
/// recursive tree with a random root.
inline std::vector<std::size_t> random_heads(CounterRng& rng, std::size_t tokens, std::size_t sentences) {
  std::vector<std::size_t> heads(tokens);
  std::vector<std::size_t> cuts{0};
  for (std::size_t s = 1; s < sentences; ++s) cuts.push_back(s * tokens / sentences);
  cuts.push_back(tokens);
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    std::vector<std::size_t> order;
    for (std::size_t t = cuts[s]; t < cuts[s + 1]; ++t) order.push_back(t);
    rng.shuffle(order);
    heads[order[0]] = order[0];
    for (std::size_t k = 1; k < order.size(); ++k) heads[order[k]] = order[rng.below(k)];
  }
  return heads;
}

/// Undirected edge list: child-head arcs plus links between consecutive
/// sentence roots (sentences ordered by first token).
inline std::vector<std::vector<bool>> adjacency_matrix(const std::vector<std::size_t>& heads) {
  const std::size_t n = heads.size();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  auto root_of = [&](std::size_t t) {
    for (std::size_t guard = 0; guard <= n && heads[t] != t; ++guard) t = heads[t];
    return t;
  };
  std::vector<std::size_t> roots;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t r = root_of(t);
    if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
    if (heads[t] != t) adj[t][heads[t]] = adj[heads[t]][t] = true;
  }
  for (std::size_t s = 1; s < roots.size(); ++s) adj[roots[s - 1]][roots[s]] = adj[roots[s]][roots[s - 1]] = true;
  return adj;
}

/// All-pairs hop counts by Floyd–Warshall.
inline std::vector<std::vector<std::size_t>> all_pairs(const std::vector<std::vector<bool>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, kFar));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (adj[i][j]) d[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

/// Plain BFS hop count.
inline std::size_t bfs_length(const std::vector<std::vector<bool>>& adj, std::size_t src, std::size_t dst) {
  std::vector<std::size_t> dist(adj.size(), kFar);
  std::deque<std::size_t> q{src};
  dist[src] = 0;
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop_front();
    for (std::size_t v = 0; v < adj.size(); ++v) {
      if (adj[u][v] && dist[v] == kFar) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
    }
  }
  return dist[dst];
}

/// Lexicographically least shortest path, by exhaustive enumeration of all
/// shortest paths (DFS along distance-decreasing edges).
inline std::vector<std::size_t> least_path(const std::vector<std::vector<bool>>& adj,
                                           const std::vector<std::vector<std::size_t>>& d, std::size_t src,
                                           std::size_t dst) {
  std::vector<std::vector<std::size_t>> all;
  std::vector<std::size_t> cur{src};
  auto dfs = [&](auto&& self, std::size_t u) -> void {
    if (u == dst) {
      all.push_back(cur);
      return;
    }
    for (std::size_t v = 0; v < adj.size(); ++v) {
      if (adj[u][v] && d[v][dst] + 1 == d[u][dst]) {
        cur.push_back(v);
        self(self, v);
        cur.pop_back();
      }
    }
  };
  dfs(dfs, src);
  return *std::min_element(all.begin(), all.end());
}

/// Rule application by brute force: returns each token's neighbors in
/// priority order (before capping): self, head, i-1, i+1, then path tokens
/// ordered by (hops from the owning mention, token index).
inline std::vector<std::vector<std::size_t>> neighbor_priority(const RelationInstance& inst) {
  const std::size_t n = inst.tokens.size();
  std::vector<std::size_t> heads;
  for (const auto& arc : inst.dep) heads.push_back(arc.head);
  const auto adj = adjacency_matrix(heads);
  const auto d = all_pairs(adj);

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> extra(n);
  for (const Entity& e : inst.entities)
    for (const Span& m : e.mentions)
      for (const Entity& o : inst.entities) {
        if (o.eid == e.eid) continue;
        for (const Span& m2 : o.mentions) {
          std::vector<std::size_t> best;
          for (std::size_t a = m.begin; a < m.end; ++a)
            for (std::size_t b = m2.begin; b < m2.end; ++b) {
              auto p = least_path(adj, d, a, b);
              if (best.empty() || p.size() < best.size() || (p.size() == best.size() && p < best)) best = p;
            }
          for (std::size_t t = m.begin; t < m.end; ++t)
            for (std::size_t h = 0; h < best.size(); ++h) extra[t].emplace_back(h, best[h]);
        }
      }

  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order{i, heads[i]};
    if (i > 0) order.push_back(i - 1);
    if (i + 1 < n) order.push_back(i + 1);
    std::sort(extra[i].begin(), extra[i].end());
    for (auto [h, t] : extra[i]) order.push_back(t);
    std::vector<std::size_t> dedup;
    for (std::size_t t : order)
      if (std::find(dedup.begin(), dedup.end(), t) == dedup.end()) dedup.push_back(t);
    out[i] = dedup;
  }
  return out;
}

inline std::vector<std::vector<std::size_t>> neighbor_sets(const RelationInstance& inst,
                                                           std::optional<std::size_t> cap) {
  auto sets = neighbor_priority(inst);
  for (auto& s : sets) {
    if (cap && s.size() > *cap) s.resize(*cap);
    std::sort(s.begin(), s.end());
  }
  return sets;
}

/// Random instance with `entities` single- or two-token mentions.
inline RelationInstance random_instance(CounterRng& rng, std::size_t tokens, std::size_t sentences,
                                        std::size_t entities, std::size_t max_mentions = 2) {
  RelationInstance inst;
  inst.id = "r" + std::to_string(rng.below(1000000));
  inst.task = Task::kNary2;
  inst.label = rng.below(2) ? "yes" : "no";
  const auto heads = random_heads(rng, tokens, sentences);
  for (std::size_t t = 0; t < tokens; ++t) {
    inst.tokens.push_back("w" + std::to_string(rng.below(20)));
    inst.dep.push_back({heads[t], "dep"});
  }
  std::vector<bool> used(tokens, false);
  for (std::size_t e = 0; e < entities; ++e) {
    Entity entity;
    entity.eid = "E" + std::to_string(e);
    entity.kb_ids = {"K" + std::to_string(e)};
    const std::size_t mentions = 1 + rng.below(max_mentions);
    for (std::size_t m = 0; m < mentions; ++m) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const std::size_t len = 1 + rng.below(2);
        const std::size_t start = rng.below(tokens);
        if (start + len > tokens) continue;
        bool free = true;
        for (std::size_t t = start; t < start + len; ++t) free = free && !used[t];
        if (!free) continue;
        for (std::size_t t = start; t < start + len; ++t) used[t] = true;
        entity.mentions.push_back({start, start + len});
        break;
      }
    }
    if (entity.mentions.empty()) {
      for (std::size_t t = 0; t < tokens; ++t)
        if (!used[t]) {
          used[t] = true;
          entity.mentions.push_back({t, t + 1});
          break;
        }
    }
    std::sort(entity.mentions.begin(), entity.mentions.end());
    inst.entities.push_back(std::move(entity));
  }
  return inst;
}

inline Tensor random_tensor(Shape shape, CounterRng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

inline AttentionParams random_params(std::size_t h, CounterRng& rng, double scale = 0.5) {
  return {random_tensor({h, h}, rng, scale), random_tensor({h, h}, rng, scale),
          random_tensor({h, h}, rng, scale), random_tensor({h, h}, rng, scale)};
}

// Explicit per-element evaluation of multi-head attention, written from the
// textbook definition with scalar loops only.
inline Tensor attention_oracle(const Tensor& x, const AttentionParams& p, std::size_t heads,
                        const std::vector<std::vector<bool>>* allowed) {
  const std::size_t t = x.rows();
  const std::size_t h = x.cols();
  const std::size_t hw = h / heads;
  auto project = [&](const Tensor& m) {
    Tensor out({t, h});
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t c = 0; c < h; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < h; ++k) s += x.at(i, k) * m.at(k, c);
        out.at(i, c) = s;
      }
    return out;
  };
  const Tensor q = project(p.query), k = project(p.key), v = project(p.value);
  Tensor concat({t, h});
  for (std::size_t head = 0; head < heads; ++head) {
    const std::size_t off = head * hw;
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> score(t, 0.0);
      double peak = -1e300;
      for (std::size_t j = 0; j < t; ++j) {
        if (allowed && !(*allowed)[i][j]) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < hw; ++c) s += q.at(i, off + c) * k.at(j, off + c);
        score[j] = s / std::sqrt(static_cast<double>(hw));
        peak = std::max(peak, score[j]);
      }
      double z = 0.0;
      std::vector<double> w(t, 0.0);
      for (std::size_t j = 0; j < t; ++j) {
        if (allowed && !(*allowed)[i][j]) continue;
        w[j] = std::exp(score[j] - peak);
        z += w[j];
      }
      for (std::size_t c = 0; c < hw; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < t; ++j) s += w[j] / z * v.at(j, off + c);
        concat.at(i, off + c) = s;
      }
    }
  }
  Tensor out({t, h});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t c = 0; c < h; ++c) {
      double s = 0.0;
      for (std::size_t k2 = 0; k2 < h; ++k2) s += concat.at(i, k2) * p.output.at(k2, c);
      out.at(i, c) = s;
    }
  return out;
}

/// Row-wise normalization with population variance.
inline Tensor layer_norm_oracle(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) mean += x.at(i, c) / static_cast<double>(x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) var += (x.at(i, c) - mean) * (x.at(i, c) - mean);
    var /= static_cast<double>(x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(i, c) = (x.at(i, c) - mean) / std::sqrt(var + eps) * gain[c] + bias[c];
  }
  return out;
}

inline Tensor affine_oracle(const Tensor& x, const Tensor& m, const Tensor& b) {
  Tensor out({x.rows(), m.cols()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      double s = b[c];
      for (std::size_t k = 0; k < x.cols(); ++k) s += x.at(i, k) * m.at(k, c);
      out.at(i, c) = s;
    }
  return out;
}

/// One encoder block composed from the scalar oracles, no dropout.
inline Tensor block_oracle(const Tensor& x, const BlockWeights<Tensor>& w, std::size_t heads,
                           const std::vector<std::vector<bool>>* allowed) {
  const Tensor att = attention_oracle(x, w.attention, heads, allowed);
  Tensor sum1 = x;
  sum1 += att;
  const Tensor h1 = layer_norm_oracle(sum1, w.norm1_gain, w.norm1_bias, 1e-12);
  Tensor inner = affine_oracle(h1, w.ffn_in, w.ffn_in_bias);
  for (double& v : inner.values()) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  Tensor sum2 = h1;
  sum2 += affine_oracle(inner, w.ffn_out, w.ffn_out_bias);
  return layer_norm_oracle(sum2, w.norm2_gain, w.norm2_bias, 1e-12);
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion(const std::vector<bool>& gold, const std::vector<bool>& pred) {
  Confusion c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] && pred[i]) ++c.tp;
    else if (!gold[i] && pred[i]) ++c.fp;
    else if (gold[i] && !pred[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// Textbook paired t statistic.
inline double paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += (a[i] - b[i]) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return mean / (sd / std::sqrt(n));
}

}  // namespace gtrel::oracle
