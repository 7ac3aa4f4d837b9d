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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gtrel/numerics/tape.hpp"
#include "gtrel/numerics/tensor.hpp"

namespace gtrel {

/// Projection matrices of one multi-head attention layer, all h×h. Head j
/// owns columns [j·h', (j+1)·h') of the query/key/value projections.
/// Instantiated with Tensor for storage and with Var for a bound forward pass.
template <typename T>
struct AttentionWeights {
  T query;
  T key;
  T value;
  T output;

  template <typename F>
  void for_each(F&& f, const std::string& prefix) {
    f(prefix + "query", query);
    f(prefix + "key", key);
    f(prefix + "value", value);
    f(prefix + "output", output);
  }
  template <typename F>
  void for_each(F&& f, const std::string& prefix) const {
    f(prefix + "query", query);
    f(prefix + "key", key);
    f(prefix + "value", value);
    f(prefix + "output", output);
  }
  template <typename U, typename F>
  AttentionWeights<U> map(F&& f) const {
    return {f(query), f(key), f(value), f(output)};
  }
};

using AttentionParams = AttentionWeights<Tensor>;

/// Checks h mod heads == 0 and returns h' = h / heads.
std::size_t head_width(std::size_t width, std::size_t heads);

/// Static T×T neighbor relation; row i lists the keys query i may attend to.
class NeighborMask {
 public:
  NeighborMask() = default;
  explicit NeighborMask(std::size_t tokens);

  static NeighborMask complete(std::size_t tokens);
  /// Throws Error(kGraph) for out-of-range indices or empty rows.
  static NeighborMask from_sets(const std::vector<std::vector<std::size_t>>& neighbors);

  std::size_t tokens() const noexcept { return tokens_; }
  bool allows(std::size_t query, std::size_t key) const { return allowed_[query * tokens_ + key] != 0; }
  void allow(std::size_t query, std::size_t key) { allowed_[query * tokens_ + key] = 1; }
  std::span<const std::uint8_t> entries() const noexcept { return allowed_; }
  std::vector<std::size_t> row(std::size_t query) const;

  /// Throws Error(kGraph) naming the first empty row.
  void validate() const;

 private:
  std::size_t tokens_ = 0;
  std::vector<std::uint8_t> allowed_;
};

/// Column slices of X, one per head.
std::vector<Var> apply_head_split(Var x, std::size_t heads);
std::vector<Tensor> apply_head_split(const Tensor& x, std::size_t heads);

/// Per-head attention probabilities, heads × (T×T), captured on request.
using AttentionProbe = std::vector<Tensor>;

/// Multi-head scaled dot-product attention over every token.
Var self_attention(Var x, const AttentionWeights<Var>& w, std::size_t heads,
                   AttentionProbe* probe = nullptr);

/// Same as self_attention, but query i only scores the keys in mask row i.
Var neighbor_attention(Var x, const AttentionWeights<Var>& w, std::size_t heads,
                       const NeighborMask& mask, AttentionProbe* probe = nullptr);

// Tensor-in/Tensor-out forms for inference and tests.
Tensor self_attention(const Tensor& x, const AttentionParams& params, std::size_t heads);
Tensor neighbor_attention(const Tensor& x, const AttentionParams& params, std::size_t heads,
                          const NeighborMask& mask);

}  // namespace gtrel
