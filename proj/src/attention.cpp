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

#include "gtrel/attention.hpp"

#include <cmath>

#include "gtrel/error.hpp"
#include "gtrel/numerics/ops.hpp"

namespace gtrel {

std::size_t head_width(std::size_t width, std::size_t heads) {
  if (heads == 0 || width % heads != 0) {
    fail(ErrorKind::kConfig, "model width " + std::to_string(width) +
                                 " is not divisible by head count " + std::to_string(heads));
  }
  return width / heads;
}

NeighborMask::NeighborMask(std::size_t tokens) : tokens_(tokens), allowed_(tokens * tokens, 0) {}

NeighborMask NeighborMask::complete(std::size_t tokens) {
  NeighborMask mask(tokens);
  std::fill(mask.allowed_.begin(), mask.allowed_.end(), std::uint8_t{1});
  return mask;
}

NeighborMask NeighborMask::from_sets(const std::vector<std::vector<std::size_t>>& neighbors) {
  NeighborMask mask(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    for (std::size_t j : neighbors[i]) {
      if (j >= neighbors.size()) {
        fail(ErrorKind::kGraph, "neighbor " + std::to_string(j) + " of token " +
                                    std::to_string(i) + " is out of range");
      }
      mask.allow(i, j);
    }
  }
  mask.validate();
  return mask;
}

std::vector<std::size_t> NeighborMask::row(std::size_t query) const {
  std::vector<std::size_t> keys;
  for (std::size_t j = 0; j < tokens_; ++j) {
    if (allows(query, j)) keys.push_back(j);
  }
  return keys;
}

void NeighborMask::validate() const {
  for (std::size_t i = 0; i < tokens_; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < tokens_ && !any; ++j) any = allows(i, j);
    if (!any) fail(ErrorKind::kGraph, "token " + std::to_string(i) + " has no attention neighbors");
  }
}

std::vector<Var> apply_head_split(Var x, std::size_t heads) {
  const std::size_t width = head_width(x.value().cols(), heads);
  std::vector<Var> slices;
  slices.reserve(heads);
  for (std::size_t j = 0; j < heads; ++j) slices.push_back(ops::slice_cols(x, j * width, (j + 1) * width));
  return slices;
}

std::vector<Tensor> apply_head_split(const Tensor& x, std::size_t heads) {
  Tape tape;
  std::vector<Tensor> out;
  for (const Var& v : apply_head_split(tape.constant(x), heads)) out.push_back(v.value());
  return out;
}

namespace {

Var attend(Var x, const AttentionWeights<Var>& w, std::size_t heads, const NeighborMask* mask,
           AttentionProbe* probe) {
  const std::size_t tokens = x.value().rows();
  const std::size_t width = head_width(x.value().cols(), heads);
  if (mask != nullptr && mask->tokens() != tokens) {
    fail(ErrorKind::kShape, "neighbor mask covers " + std::to_string(mask->tokens()) +
                                " tokens, input has " + std::to_string(tokens));
  }
  if (mask != nullptr) mask->validate();

  const Var q = ops::matmul(x, w.query);
  const Var k = ops::matmul(x, w.key);
  const Var v = ops::matmul(x, w.value);
  const std::vector<Var> qs = apply_head_split(q, heads);
  const std::vector<Var> ks = apply_head_split(k, heads);
  const std::vector<Var> vs = apply_head_split(v, heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width));

  if (probe != nullptr) probe->clear();
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t j = 0; j < heads; ++j) {
    Var scores = ops::scale(ops::matmul_nt(qs[j], ks[j]), inv_sqrt);
    if (mask != nullptr) scores = ops::mask_scores(scores, mask->entries());
    const Var probs = ops::softmax_rows(scores);
    if (probe != nullptr) probe->push_back(probs.value());
    outputs.push_back(ops::matmul(probs, vs[j]));
  }
  return ops::matmul(ops::concat_cols(outputs), w.output);
}

AttentionWeights<Var> bind_constants(Tape& tape, const AttentionParams& params) {
  return params.map<Var>([&tape](const Tensor& t) { return tape.constant(t); });
}

}  // namespace

Var self_attention(Var x, const AttentionWeights<Var>& w, std::size_t heads, AttentionProbe* probe) {
  return attend(x, w, heads, nullptr, probe);
}

Var neighbor_attention(Var x, const AttentionWeights<Var>& w, std::size_t heads,
                       const NeighborMask& mask, AttentionProbe* probe) {
  return attend(x, w, heads, &mask, probe);
}

Tensor self_attention(const Tensor& x, const AttentionParams& params, std::size_t heads) {
  Tape tape;
  return self_attention(tape.constant(x), bind_constants(tape, params), heads).value();
}

Tensor neighbor_attention(const Tensor& x, const AttentionParams& params, std::size_t heads,
                          const NeighborMask& mask) {
  Tape tape;
  return neighbor_attention(tape.constant(x), bind_constants(tape, params), heads, mask).value();
}

}  // namespace gtrel
