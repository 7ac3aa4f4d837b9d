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


#include "gtrel/encoders.hpp"

#include <numeric>

#include "gtrel/error.hpp"
#include "gtrel/numerics/ops.hpp"
#include "gtrel/numerics/rng.hpp"

namespace gtrel {
namespace {

constexpr double kNormEps = 1e-12;
constexpr double kInitStd = 0.02;

Tensor ones(std::size_t n) { return Tensor({n}, 1.0); }

BlockWeights<Tensor> init_block(const EncoderConfig& cfg, std::uint64_t key) {
  const std::size_t h = cfg.width;
  auto draw = [&](Shape shape, std::uint64_t tag) {
    return truncated_normal_tensor(std::move(shape), kInitStd, derive_seed(key, {tag}));
  };
  BlockWeights<Tensor> b;
  b.attention = {draw({h, h}, 0), draw({h, h}, 1), draw({h, h}, 2), draw({h, h}, 3)};
  b.norm1_gain = ones(h);
  b.norm1_bias = Tensor({h});
  b.ffn_in = draw({h, cfg.ffn_width}, 4);
  b.ffn_in_bias = Tensor({cfg.ffn_width});
  b.ffn_out = draw({cfg.ffn_width, h}, 5);
  b.ffn_out_bias = Tensor({h});
  b.norm2_gain = ones(h);
  b.norm2_bias = Tensor({h});
  return b;
}

template <typename Fn>
Tensor run_eval(const EncoderParams& params, Fn&& fn) {
  Tape tape;
  const EncoderWeights<Var> w = bind_parameters(tape, params);
  return fn(tape, w).value();
}

}  // namespace

void EncoderConfig::validate() const {
  if (width == 0 || heads == 0 || width % heads != 0) {
    fail(ErrorKind::kConfig, "width " + std::to_string(width) + " is not divisible into " +
                                 std::to_string(heads) + " heads");
  }
  if (ffn_width == 0) fail(ErrorKind::kConfig, "ffn_width must be positive");
  if (transformer_blocks == 0) fail(ErrorKind::kConfig, "transformer_blocks must be at least 1");
  if (graph_blocks == 0) fail(ErrorKind::kConfig, "graph_blocks must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    fail(ErrorKind::kConfig, "dropout_rate must lie in [0, 1)");
  }
  if (max_len == 0) fail(ErrorKind::kConfig, "max_len must be positive");
  if (vocab_size <= kClsId) fail(ErrorKind::kConfig, "vocab_size must cover the reserved ids");
}

Var DropoutStream::apply(Var x) {
  if (!active()) return x;
  return ops::dropout(x, rate_, derive_seed(key_, {site_++}));
}

Tensor truncated_normal_tensor(Shape shape, double stddev, std::uint64_t key) {
  Tensor t(std::move(shape));
  CounterRng rng(key);
  for (double& v : t.values()) v = rng.truncated_normal(stddev);
  return t;
}

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EncoderParams p;
  p.embedding.tokens = truncated_normal_tensor({cfg.vocab_size, cfg.width}, kInitStd, derive_seed(seed, {1}));
  p.embedding.positions = truncated_normal_tensor({cfg.max_len, cfg.width}, kInitStd, derive_seed(seed, {2}));
  for (std::size_t i = 0; i < cfg.transformer_blocks; ++i) {
    p.transformer.push_back(init_block(cfg, derive_seed(seed, {3, i})));
  }
  for (std::size_t i = 0; i < cfg.graph_blocks; ++i) p.graph.push_back(init_block(cfg, derive_seed(seed, {4, i})));
  return p;
}

std::vector<std::size_t> clamp_ids(std::span<const std::size_t> ids, std::size_t vocab_size) {
  std::vector<std::size_t> out(ids.begin(), ids.end());
  for (std::size_t& id : out) {
    if (id >= vocab_size) id = kUnkId;
  }
  return out;
}

Var embed(const EmbeddingWeights<Var>& w, std::span<const std::size_t> ids, const EncoderConfig& cfg) {
  if (ids.size() > cfg.max_len) {
    fail(ErrorKind::kLength, "sequence of " + std::to_string(ids.size()) + " tokens exceeds max_len " +
                                 std::to_string(cfg.max_len));
  }
  const std::vector<std::size_t> tokens = clamp_ids(ids, w.tokens.value().rows());
  std::vector<std::size_t> positions(ids.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  return ops::add(ops::gather_rows(w.tokens, tokens), ops::gather_rows(w.positions, positions));
}

Tensor embed(const EmbeddingTable& table, std::span<const std::size_t> ids, const EncoderConfig& cfg) {
  Tape tape;
  return embed(bind_parameters(tape, table), ids, cfg).value();
}

Var encoder_block(Var x, const BlockWeights<Var>& w, std::size_t heads, const NeighborMask* mask,
                  DropoutStream& dropout) {
  Var attended = mask ? neighbor_attention(x, w.attention, heads, *mask) : self_attention(x, w.attention, heads);
  Var h1 = ops::layer_norm(ops::add(x, dropout.apply(attended)), w.norm1_gain, w.norm1_bias, kNormEps);
  Var inner = ops::gelu(ops::add_bias(ops::matmul(h1, w.ffn_in), w.ffn_in_bias));
  Var ffn = ops::add_bias(ops::matmul(inner, w.ffn_out), w.ffn_out_bias);
  return ops::layer_norm(ops::add(h1, dropout.apply(ffn)), w.norm2_gain, w.norm2_bias, kNormEps);
}

Var transformer_encode(Var x, const std::vector<BlockWeights<Var>>& blocks, const EncoderConfig& cfg,
                       DropoutStream& dropout) {
  for (const auto& block : blocks) x = encoder_block(x, block, cfg.heads, nullptr, dropout);
  return x;
}

Var graph_encode(Var x, const NeighborMask& mask, const std::vector<BlockWeights<Var>>& blocks,
                 const EncoderConfig& cfg, DropoutStream& dropout) {
  for (const auto& block : blocks) x = encoder_block(x, block, cfg.heads, &mask, dropout);
  return x;
}

Tensor transformer_encode(const Tensor& x, const EncoderConfig& cfg, const EncoderParams& params) {
  return run_eval(params, [&](Tape& tape, const EncoderWeights<Var>& w) {
    DropoutStream off;
    return transformer_encode(tape.constant(x), w.transformer, cfg, off);
  });
}

Tensor graph_encode(const Tensor& x, const NeighborMask& mask, const EncoderConfig& cfg,
                    const EncoderParams& params) {
  return run_eval(params, [&](Tape& tape, const EncoderWeights<Var>& w) {
    DropoutStream off;
    return graph_encode(tape.constant(x), mask, w.graph, cfg, off);
  });
}

}  // namespace gtrel
