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


#include "gtrel/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "gtrel/error.hpp"
#include "gtrel/graph/dependency.hpp"
#include "gtrel/numerics/ops.hpp"
#include "gtrel/numerics/rng.hpp"

namespace gtrel {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'G', 'T', 'R', 'E', 'L', 'C', 'K', 'P'};

template <typename T>
T config_value(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

void check_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen(names.begin(), names.end());
  if (seen.size() != names.size()) fail(ErrorKind::kConfig, std::string(what) + " contains duplicates");
}

}  // namespace

std::string_view to_string(SentenceMode mode) {
  return mode == SentenceMode::kCls ? "cls" : "entity_mean";
}

SentenceMode parse_sentence_mode(std::string_view name) {
  if (name == "entity_mean") return SentenceMode::kEntityMean;
  if (name == "cls") return SentenceMode::kCls;
  fail(ErrorKind::kConfig, "unknown gt_sentence_mode '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (label_set.size() < 2) fail(ErrorKind::kConfig, "label_set needs at least two labels");
  if (entity_slots.empty()) fail(ErrorKind::kConfig, "entity_slots needs at least one slot");
  check_unique(label_set, "label_set");
  check_unique(entity_slots, "entity_slots");
  if (neighbor_cap && *neighbor_cap == 0) fail(ErrorKind::kConfig, "neighbor_cap must be positive");
}

std::size_t ModelConfig::head_input_width() const {
  const std::size_t h = encoder.width;
  return gt_sentence_mode == SentenceMode::kCls ? 2 * h : h + entity_slots.size() * h;
}

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t h = cfg.encoder.width;
  ModelParams p;
  p.encoder = init_encoder(cfg.encoder, derive_seed(seed, {1}));
  p.head.linear = truncated_normal_tensor({cfg.head_input_width(), h}, 0.02, derive_seed(seed, {2, 0}));
  p.head.linear_bias = Tensor({h});
  p.head.dense = truncated_normal_tensor({h, cfg.label_set.size()}, 0.02, derive_seed(seed, {2, 1}));
  p.head.dense_bias = Tensor({cfg.label_set.size()});
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  return params.map<Tensor>([](const Tensor& t) { return Tensor::zeros_like(t); });
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  params.for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  words_ = {"[UNK]", "[CLS]"};
  index_ = {{"[UNK]", kUnkId}, {"[CLS]", kClsId}};
  for (std::string& w : words) {
    if (w == "[UNK]" || w == "[CLS]") continue;
    if (index_.count(w)) fail(ErrorKind::kConfig, "duplicate vocabulary word '" + w + "'");
    index_.emplace(w, words_.size());
    words_.push_back(std::move(w));
  }
}

Vocabulary Vocabulary::build(std::span<const RelationInstance> instances) {
  std::vector<std::string> words;
  std::set<std::string> seen{"[UNK]", "[CLS]"};
  for (const RelationInstance& inst : instances)
    for (const std::string& t : inst.tokens)
      if (seen.insert(t).second) words.push_back(t);
  return Vocabulary(std::move(words));
}

std::size_t Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnkId : it->second;
}

PreparedInstance prepare(const RelationInstance& inst, const ModelConfig& cfg, const Vocabulary& vocab) {
  const std::size_t n = inst.tokens.size();
  if (n + 1 > cfg.encoder.max_len) {
    fail(ErrorKind::kLength, "instance " + inst.id + " has " + std::to_string(n) +
                                 " tokens; max_len leaves room for " + std::to_string(cfg.encoder.max_len - 1));
  }
  PreparedInstance out;
  out.id = inst.id;
  out.origin_id = inst.origin_id();

  for (const Entity& e : inst.entities) {
    if (std::find(cfg.entity_slots.begin(), cfg.entity_slots.end(), e.eid) == cfg.entity_slots.end()) {
      fail(ErrorKind::kInstance, "instance " + inst.id + ": entity '" + e.eid + "' is not a configured slot");
    }
  }
  for (const std::string& slot : cfg.entity_slots) {
    auto it = std::find_if(inst.entities.begin(), inst.entities.end(), [&](const Entity& e) { return e.eid == slot; });
    if (it == inst.entities.end()) fail(ErrorKind::kInstance, "instance " + inst.id + ": missing entity slot " + slot);
    std::set<std::size_t> rows;
    for (const Span& s : it->mentions) {
      if (s.end > n || s.begin >= s.end) {
        fail(ErrorKind::kInstance, "instance " + inst.id + ": bad mention span in slot " + slot);
      }
      for (std::size_t t = s.begin; t < s.end; ++t) rows.insert(t + 1);
    }
    if (rows.empty()) fail(ErrorKind::kInstance, "instance " + inst.id + ": slot " + slot + " has no mentions to pool");
    out.slot_rows.emplace_back(rows.begin(), rows.end());
  }

  auto label = std::find(cfg.label_set.begin(), cfg.label_set.end(), inst.label);
  if (label == cfg.label_set.end()) {
    fail(ErrorKind::kLabel, "instance " + inst.id + ": label '" + inst.label + "' is not in the label set");
  }
  out.gold = static_cast<std::size_t>(label - cfg.label_set.begin());

  out.ids.push_back(kClsId);
  for (const std::string& t : inst.tokens) out.ids.push_back(vocab.id(t));

  // The classification token sees itself and token 1; nothing else sees it.
  std::vector<std::vector<std::size_t>> sets{{0}};
  if (n > 0 && (!cfg.neighbor_cap || *cfg.neighbor_cap > 1)) sets[0].push_back(1);
  if (n > 0) {
    const NeighborGraph graph = build_neighbors(inst, cfg.neighbor_cap);
    for (const auto& row : graph.neighbors) {
      std::vector<std::size_t> shifted;
      for (std::size_t t : row) shifted.push_back(t + 1);
      sets.push_back(std::move(shifted));
    }
  }
  out.mask = NeighborMask::from_sets(sets);
  out.single_sentence = single_sentence(inst);
  return out;
}

std::vector<PreparedInstance> prepare_all(std::span<const RelationInstance> instances, const ModelConfig& cfg,
                                          const Vocabulary& vocab) {
  std::vector<PreparedInstance> out;
  out.reserve(instances.size());
  for (const RelationInstance& inst : instances) out.push_back(prepare(inst, cfg, vocab));
  return out;
}

Var forward(const ModelWeights<Var>& w, const PreparedInstance& inst, const ModelConfig& cfg, DropoutStream& dropout,
            ForwardTrace* trace) {
  Tape& tape = w.head.linear.tape();
  const std::size_t h = cfg.encoder.width;
  const Var x = embed(w.encoder.embedding, inst.ids, cfg.encoder);
  const Var tr = transformer_encode(x, w.encoder.transformer, cfg.encoder, dropout);
  const std::size_t first[] = {0};
  const Var sentence = ops::gather_rows(tr, first);

  Var graph_rep;
  if (cfg.ablate_graph) {
    graph_rep = tape.constant(Tensor({1, cfg.head_input_width() - h}));
  } else {
    const Var gt = graph_encode(x, inst.mask, w.encoder.graph, cfg.encoder, dropout);
    if (cfg.gt_sentence_mode == SentenceMode::kCls) {
      graph_rep = ops::gather_rows(gt, first);
    } else {
      std::vector<Var> parts;
      for (const auto& rows : inst.slot_rows) parts.push_back(ops::mean_rows(gt, rows));
      graph_rep = ops::concat_cols(parts);
    }
  }
  const Var features = ops::concat_cols(std::vector<Var>{sentence, graph_rep});
  const Var hidden = ops::gelu(ops::add_bias(ops::matmul(features, w.head.linear), w.head.linear_bias));
  const Var logits = ops::add_bias(ops::matmul(hidden, w.head.dense), w.head.dense_bias);
  if (trace) *trace = {sentence, graph_rep, logits};
  return logits;
}

Tensor forward(const ModelParams& params, const PreparedInstance& inst, const ModelConfig& cfg) {
  Tape tape;
  const ModelWeights<Var> w = params.map<Var>([&tape](const Tensor& t) { return tape.borrow(t); });
  DropoutStream off;
  return forward(w, inst, cfg, off).value();
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double peak = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) z += (v = std::exp(v - peak));
  for (double& v : p) v /= z;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::kShape, "argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::string predict(const ModelParams& params, const PreparedInstance& inst, const ModelConfig& cfg) {
  const Tensor logits = forward(params, inst, cfg);
  return cfg.label_set[argmax(softmax(logits.values()))];
}

LossAndGrads loss_and_grads(std::span<const PreparedInstance* const> batch, const ModelParams& params,
                            const ModelConfig& cfg, std::optional<std::uint64_t> dropout_key) {
  if (batch.empty()) fail(ErrorKind::kConfig, "loss_and_grads needs a nonempty batch");
  Tape tape;
  const ModelWeights<Var> w = params.map<Var>([&tape](const Tensor& t) { return tape.parameter(t); });
  DropoutStream dropout = dropout_key ? DropoutStream(cfg.encoder.dropout_rate, *dropout_key) : DropoutStream();
  std::vector<Var> logits;
  std::vector<std::size_t> gold;
  for (const PreparedInstance* inst : batch) {
    logits.push_back(forward(w, *inst, cfg, dropout));
    gold.push_back(inst->gold);
  }
  const Var loss = ops::cross_entropy(ops::concat_rows(logits), gold);
  tape.backward(loss);

  LossAndGrads out;
  out.loss = loss.value()[0];
  out.grads = w.map<Tensor>([](const Var& v) { return v.grad().shape().empty() ? Tensor::zeros_like(v.value()) : v.grad(); });
  return out;
}

json to_json(const ModelConfig& cfg) {
  const EncoderConfig& e = cfg.encoder;
  return {{"width", e.width},
          {"heads", e.heads},
          {"ffn_width", e.ffn_width},
          {"transformer_blocks", e.transformer_blocks},
          {"graph_blocks", e.graph_blocks},
          {"dropout_rate", e.dropout_rate},
          {"max_len", e.max_len},
          {"vocab_size", e.vocab_size},
          {"label_set", cfg.label_set},
          {"entity_slots", cfg.entity_slots},
          {"gt_sentence_mode", std::string(to_string(cfg.gt_sentence_mode))},
          {"neighbor_cap", cfg.neighbor_cap ? json(*cfg.neighbor_cap) : json(nullptr)},
          {"ablate_graph", cfg.ablate_graph}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig base) {
  if (!j.is_object()) fail(ErrorKind::kConfig, "model config must be a JSON object");
  static const std::set<std::string> known = {"width",      "heads",        "ffn_width",        "transformer_blocks",
                                              "graph_blocks", "dropout_rate", "max_len",          "vocab_size",
                                              "label_set",  "entity_slots", "gt_sentence_mode", "neighbor_cap",
                                              "ablate_graph"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) fail(ErrorKind::kConfig, "unknown model config key '" + item.key() + "'");
  }
  EncoderConfig& e = base.encoder;
  e.width = config_value(j, "width", e.width);
  e.heads = config_value(j, "heads", e.heads);
  e.ffn_width = config_value(j, "ffn_width", e.ffn_width);
  e.transformer_blocks = config_value(j, "transformer_blocks", e.transformer_blocks);
  e.graph_blocks = config_value(j, "graph_blocks", e.graph_blocks);
  e.dropout_rate = config_value(j, "dropout_rate", e.dropout_rate);
  e.max_len = config_value(j, "max_len", e.max_len);
  e.vocab_size = config_value(j, "vocab_size", e.vocab_size);
  base.label_set = config_value(j, "label_set", base.label_set);
  base.entity_slots = config_value(j, "entity_slots", base.entity_slots);
  if (j.contains("gt_sentence_mode")) {
    base.gt_sentence_mode = parse_sentence_mode(config_value<std::string>(j, "gt_sentence_mode", ""));
  }
  if (auto it = j.find("neighbor_cap"); it != j.end()) {
    base.neighbor_cap = it->is_null() ? std::nullopt : std::optional(config_value<std::size_t>(j, "neighbor_cap", 0));
  }
  base.ablate_graph = config_value(j, "ablate_graph", base.ablate_graph);
  return base;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  json tensors = json::array();
  std::size_t offset = 0;
  ckpt.params.for_each([&](const std::string& name, const Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  });
  const json header = {{"version", kCheckpointVersion}, {"config", to_json(ckpt.config)},
                       {"vocab", ckpt.vocab.words()},   {"tensors", tensors},
                       {"dtype", "float64-le"}};
  const std::string text = header.dump();
  const auto length = static_cast<std::uint32_t>(text.size());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  ckpt.params.for_each([&](const std::string&, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) fail(ErrorKind::kIo, "checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  std::uint32_t length = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    fail(ErrorKind::kParse, "not a checkpoint file");
  }
  if (!in.read(reinterpret_cast<char*>(&length), sizeof length)) fail(ErrorKind::kParse, "truncated checkpoint header");
  std::string text(length, '\0');
  if (!in.read(text.data(), length)) fail(ErrorKind::kParse, "truncated checkpoint header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("version", 0) != kCheckpointVersion) {
    fail(ErrorKind::kConfig, "unsupported checkpoint version " + header.value("version", json(0)).dump());
  }
  Checkpoint ckpt;
  try {
    ckpt.config = model_config_from_json(header.at("config"));
    ckpt.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("checkpoint header: ") + e.what());
  }
  ckpt.params = init_model(ckpt.config, 0);

  std::map<std::string, Tensor*> by_name;
  ckpt.params.for_each([&](const std::string& name, Tensor& t) { by_name[name] = &t; });
  const std::streampos payload = in.tellg();
  for (const json& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::kParse, "checkpoint tensor '" + name + "' is unknown");
    Tensor& t = *it->second;
    if (entry.at("shape").get<Shape>() != t.shape()) {
      fail(ErrorKind::kShape, "checkpoint tensor '" + name + "' has shape " +
                                  shape_string(entry.at("shape").get<Shape>()) + ", config implies " +
                                  shape_string(t.shape()));
    }
    in.seekg(payload + static_cast<std::streamoff>(entry.at("offset").get<std::size_t>() * sizeof(double)));
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      fail(ErrorKind::kParse, "checkpoint payload truncated at '" + name + "'");
    }
    by_name.erase(it);
  }
  if (!by_name.empty()) fail(ErrorKind::kParse, "checkpoint lacks tensor '" + by_name.begin()->first + "'");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace gtrel
