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

#include "gtrel/attention.hpp"
#include "gtrel/numerics/tape.hpp"
#include "gtrel/numerics/tensor.hpp"

namespace gtrel {

/// Reserved vocabulary ids.
inline constexpr std::size_t kUnkId = 0;
inline constexpr std::size_t kClsId = 1;

struct EncoderConfig {
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t ffn_width = 128;
  std::size_t transformer_blocks = 2;
  std::size_t graph_blocks = 2;
  double dropout_rate = 0.1;
  std::size_t max_len = 128;
  std::size_t vocab_size = 2;

  /// Throws Error(kConfig) on the first violated invariant.
  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <typename T>
struct EmbeddingWeights {
  T tokens;     // vocab_size × h
  T positions;  // max_len × h

  template <typename F>
  void for_each(F&& f, const std::string& prefix) {
    f(prefix + "tokens", tokens);
    f(prefix + "positions", positions);
  }
  template <typename F>
  void for_each(F&& f, const std::string& prefix) const {
    f(prefix + "tokens", tokens);
    f(prefix + "positions", positions);
  }
  template <typename U, typename F>
  EmbeddingWeights<U> map(F&& f) const {
    return {f(tokens), f(positions)};
  }
};

/// One encoder block: attention, residual, norm, FFN, residual, norm.
template <typename T>
struct BlockWeights {
  AttentionWeights<T> attention;
  T norm1_gain, norm1_bias;
  T ffn_in, ffn_in_bias;    // h × ffn, ffn
  T ffn_out, ffn_out_bias;  // ffn × h, h
  T norm2_gain, norm2_bias;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f, const std::string& prefix) {
    self.attention.for_each(f, prefix + "attention.");
    f(prefix + "norm1.gain", self.norm1_gain);
    f(prefix + "norm1.bias", self.norm1_bias);
    f(prefix + "ffn.in", self.ffn_in);
    f(prefix + "ffn.in_bias", self.ffn_in_bias);
    f(prefix + "ffn.out", self.ffn_out);
    f(prefix + "ffn.out_bias", self.ffn_out_bias);
    f(prefix + "norm2.gain", self.norm2_gain);
    f(prefix + "norm2.bias", self.norm2_bias);
  }
  template <typename F>
  void for_each(F&& f, const std::string& prefix) {
    visit(*this, f, prefix);
  }
  template <typename F>
  void for_each(F&& f, const std::string& prefix) const {
    visit(*this, f, prefix);
  }
  template <typename U, typename F>
  BlockWeights<U> map(F&& f) const {
    return {attention.template map<U>(f), f(norm1_gain), f(norm1_bias), f(ffn_in),     f(ffn_in_bias),
            f(ffn_out),                   f(ffn_out_bias), f(norm2_gain), f(norm2_bias)};
  }
};

/// Shared embedding plus the two encoder stacks.
template <typename T>
struct EncoderWeights {
  EmbeddingWeights<T> embedding;
  std::vector<BlockWeights<T>> transformer;
  std::vector<BlockWeights<T>> graph;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f, const std::string& prefix) {
    self.embedding.for_each(f, prefix + "embedding.");
    for (std::size_t i = 0; i < self.transformer.size(); ++i) {
      self.transformer[i].for_each(f, prefix + "transformer." + std::to_string(i) + ".");
    }
    for (std::size_t i = 0; i < self.graph.size(); ++i) {
      self.graph[i].for_each(f, prefix + "graph." + std::to_string(i) + ".");
    }
  }
  template <typename F>
  void for_each(F&& f, const std::string& prefix = "") {
    visit(*this, f, prefix);
  }
  template <typename F>
  void for_each(F&& f, const std::string& prefix = "") const {
    visit(*this, f, prefix);
  }
  template <typename U, typename F>
  EncoderWeights<U> map(F&& f) const {
    EncoderWeights<U> out{embedding.template map<U>(f), {}, {}};
    for (const auto& b : transformer) out.transformer.push_back(b.template map<U>(f));
    for (const auto& b : graph) out.graph.push_back(b.template map<U>(f));
    return out;
  }
};

using EmbeddingTable = EmbeddingWeights<Tensor>;
using EncoderParams = EncoderWeights<Tensor>;

/// Binds every tensor of a weight struct as a parameter leaf of `tape`.
template <typename Params>
auto bind_parameters(Tape& tape, const Params& params) {
  return params.template map<Var>([&tape](const Tensor& t) { return tape.parameter(t); });
}

/// Dropout with a fresh derived key per call site. Inactive streams are the
/// identity, which is eval mode.
class DropoutStream {
 public:
  DropoutStream() = default;
  DropoutStream(double rate, std::uint64_t key) : rate_(rate), key_(key) {}

  Var apply(Var x);
  bool active() const noexcept { return rate_ > 0.0; }

 private:
  double rate_ = 0.0;
  std::uint64_t key_ = 0;
  std::uint64_t site_ = 0;
};

/// Truncated-normal (std 0.02) matrices and embeddings, unit gains, zero
/// biases. Pure function of (config, seed).
EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed);
Tensor truncated_normal_tensor(Shape shape, double stddev, std::uint64_t key);

/// Maps ids ≥ vocab_size to kUnkId.
std::vector<std::size_t> clamp_ids(std::span<const std::size_t> ids, std::size_t vocab_size);

/// Token plus position embedding, T×h. Throws Error(kLength) when
/// T > max_len.
Var embed(const EmbeddingWeights<Var>& w, std::span<const std::size_t> ids, const EncoderConfig& cfg);
Tensor embed(const EmbeddingTable& table, std::span<const std::size_t> ids, const EncoderConfig& cfg);

/// One block; `mask` null means self-attention.
Var encoder_block(Var x, const BlockWeights<Var>& w, std::size_t heads, const NeighborMask* mask,
                  DropoutStream& dropout);

Var transformer_encode(Var x, const std::vector<BlockWeights<Var>>& blocks, const EncoderConfig& cfg,
                       DropoutStream& dropout);
Var graph_encode(Var x, const NeighborMask& mask, const std::vector<BlockWeights<Var>>& blocks,
                 const EncoderConfig& cfg, DropoutStream& dropout);

// Eval-mode Tensor forms.
Tensor transformer_encode(const Tensor& x, const EncoderConfig& cfg, const EncoderParams& params);
Tensor graph_encode(const Tensor& x, const NeighborMask& mask, const EncoderConfig& cfg,
                    const EncoderParams& params);

}  // namespace gtrel
