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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "gtrel/attention.hpp"
#include "gtrel/encoders.hpp"
#include "gtrel/graph/instance.hpp"
#include "gtrel/graph/neighbors.hpp"

namespace gtrel {

/// What the GT branch contributes to the output head.
enum class SentenceMode {
  kEntityMean,  // mean-pooled mention rows, one per entity slot
  kCls,         // GT output row 0
};

std::string_view to_string(SentenceMode mode);
SentenceMode parse_sentence_mode(std::string_view name);

struct ModelConfig {
  EncoderConfig encoder;
  std::vector<std::string> label_set;
  std::vector<std::string> entity_slots;
  SentenceMode gt_sentence_mode = SentenceMode::kEntityMean;
  std::optional<std::size_t> neighbor_cap;
  /// Transformer-only ablation: the GT contribution to the head is zero.
  bool ablate_graph = false;

  void validate() const;
  /// Input width of the head's linear layer.
  std::size_t head_input_width() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct HeadWeights {
  T linear, linear_bias;  // head_input × h, h
  T dense, dense_bias;    // h × |labels|, |labels|

  template <typename Self, typename F>
  static void visit(Self& self, F&& f, const std::string& prefix) {
    f(prefix + "linear", self.linear);
    f(prefix + "linear_bias", self.linear_bias);
    f(prefix + "dense", self.dense);
    f(prefix + "dense_bias", self.dense_bias);
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
  HeadWeights<U> map(F&& f) const {
    return {f(linear), f(linear_bias), f(dense), f(dense_bias)};
  }
};

template <typename T>
struct ModelWeights {
  EncoderWeights<T> encoder;
  HeadWeights<T> head;

  template <typename F>
  void for_each(F&& f) {
    encoder.for_each(f, "");
    head.for_each(f, "head.");
  }
  template <typename F>
  void for_each(F&& f) const {
    encoder.for_each(f, "");
    head.for_each(f, "head.");
  }
  template <typename U, typename F>
  ModelWeights<U> map(F&& f) const {
    return {encoder.template map<U>(f), head.template map<U>(f)};
  }
};

using OutputHead = HeadWeights<Tensor>;
using ModelParams = ModelWeights<Tensor>;

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);
/// Same shapes, all zero.
ModelParams zeros_like(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

/// Word-level vocabulary with the reserved ids first.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);

  /// Every token of every instance, in first-seen order.
  static Vocabulary build(std::span<const RelationInstance> instances);

  std::size_t id(const std::string& word) const;
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Model-ready form of one instance: the classification token at position 0,
/// every original token shifted by one.
struct PreparedInstance {
  std::string id;
  std::string origin_id;
  std::vector<std::size_t> ids;
  NeighborMask mask;
  /// Per entity slot: distinct token rows of all its mentions.
  std::vector<std::vector<std::size_t>> slot_rows;
  std::size_t gold = 0;
  bool single_sentence = true;
};

/// Throws Error(kInstance) when the entities do not match the configured
/// slots or a slot has no mentions, Error(kLabel) for a label outside the
/// label set, Error(kLength) when the instance does not fit max_len.
PreparedInstance prepare(const RelationInstance& inst, const ModelConfig& cfg, const Vocabulary& vocab);
std::vector<PreparedInstance> prepare_all(std::span<const RelationInstance> instances, const ModelConfig& cfg,
                                          const Vocabulary& vocab);

/// Intermediate values of one forward pass, for tests and probes.
struct ForwardTrace {
  Var sentence_rep;
  Var graph_rep;
  Var logits;
};

/// Logits, 1 × |labels|.
Var forward(const ModelWeights<Var>& w, const PreparedInstance& inst, const ModelConfig& cfg,
            DropoutStream& dropout, ForwardTrace* trace = nullptr);
/// Eval mode.
Tensor forward(const ModelParams& params, const PreparedInstance& inst, const ModelConfig& cfg);

std::vector<double> softmax(std::span<const double> logits);
/// First maximal index.
std::size_t argmax(std::span<const double> values);
std::string predict(const ModelParams& params, const PreparedInstance& inst, const ModelConfig& cfg);

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean cross-entropy over the batch. A dropout key enables train mode.
LossAndGrads loss_and_grads(std::span<const PreparedInstance* const> batch, const ModelParams& params,
                            const ModelConfig& cfg, std::optional<std::uint64_t> dropout_key = std::nullopt);

nlohmann::json to_json(const ModelConfig& cfg);
/// Missing keys keep their defaults; unknown keys and bad values are
/// Error(kConfig).
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace gtrel
