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


#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gtrel/error.hpp"
#include "gtrel/model.hpp"
#include "gtrel/numerics/grad_check.hpp"
#include "gtrel/numerics/ops.hpp"
#include "oracles.hpp"

using namespace gtrel;
using oracle::random_tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.encoder.width = 8;
  cfg.encoder.heads = 2;
  cfg.encoder.ffn_width = 16;
  cfg.encoder.transformer_blocks = 1;
  cfg.encoder.graph_blocks = 1;
  cfg.encoder.dropout_rate = 0.0;
  cfg.encoder.max_len = 40;
  cfg.encoder.vocab_size = 24;
  cfg.label_set = {"yes", "no", "other"};
  cfg.entity_slots = {"E0", "E1"};
  return cfg;
}

ModelParams random_model(const ModelConfig& cfg, CounterRng& rng) {
  ModelParams p = init_model(cfg, rng());
  p.for_each([&](const std::string& name, Tensor& t) {
    if (name.ends_with("gain")) {
      for (double& v : t.values()) v = 1.0 + 0.2 * (2.0 * rng.uniform() - 1.0);
    } else {
      t = random_tensor(t.shape(), rng, name.find("norm") != std::string::npos ? 0.1 : 0.6);
    }
  });
  return p;
}

Vocabulary words_vocab() {
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
  return Vocabulary(words);
}

Error capture(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  return Error(ErrorKind::kIo, "no error raised");
}

std::map<const Tensor*, std::size_t> leaf_index(ModelParams& p, std::vector<Tensor*>& leaves) {
  std::map<const Tensor*, std::size_t> index;
  p.for_each([&](const std::string&, Tensor& t) {
    index[&t] = leaves.size();
    leaves.push_back(&t);
  });
  return index;
}

}  // namespace

TEST_CASE("config validation and JSON round trip") {
  ModelConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.head_input_width() == 24);
  cfg.gt_sentence_mode = SentenceMode::kCls;
  CHECK(cfg.head_input_width() == 16);
  cfg.neighbor_cap = 3;
  CHECK(model_config_from_json(to_json(cfg)) == cfg);
  cfg.label_set = {"yes"};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.entity_slots.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(capture([] { model_config_from_json({{"widht", 3}}); }).kind() == ErrorKind::kConfig);
  CHECK(capture([] { model_config_from_json({{"width", "wide"}}); }).kind() == ErrorKind::kConfig);
}

TEST_CASE("vocabulary") {
  const Vocabulary v({"a", "b"});
  CHECK(v.size() == 4);
  CHECK(v.id("a") == 2);
  CHECK(v.id("zzz") == kUnkId);
  CHECK(v.id("[CLS]") == kClsId);
}

TEST_CASE("prepare prepends the classification token") {
  RelationInstance inst;
  inst.id = "p";
  inst.tokens = {"w1", "w2", "w3", "w4"};
  inst.dep = {{1, "x"}, {2, "x"}, {2, "root"}, {2, "x"}};
  inst.label = "no";
  inst.entities = {{"E0", {"k"}, {{0, 1}}, {}}, {"E1", {"k2"}, {{3, 4}}, {}}};
  const ModelConfig cfg = tiny_config();
  const PreparedInstance p = prepare(inst, cfg, words_vocab());
  CHECK(p.ids == std::vector<std::size_t>{kClsId, 3, 4, 5, 6});
  CHECK(p.gold == 1);
  CHECK(p.mask.row(0) == std::vector<std::size_t>{0, 1});
  CHECK(p.mask.row(1) == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(p.mask.row(2) == std::vector<std::size_t>{1, 2, 3});
  CHECK(p.slot_rows == std::vector<std::vector<std::size_t>>{{1}, {4}});
  CHECK(p.single_sentence);

  RelationInstance bad = inst;
  bad.entities.pop_back();
  CHECK(capture([&] { prepare(bad, cfg, words_vocab()); }).kind() == ErrorKind::kInstance);
  bad = inst;
  bad.entities[1].mentions.clear();
  CHECK(capture([&] { prepare(bad, cfg, words_vocab()); }).kind() == ErrorKind::kInstance);
  bad = inst;
  bad.entities[1].eid = "E7";
  CHECK(capture([&] { prepare(bad, cfg, words_vocab()); }).kind() == ErrorKind::kInstance);
  bad = inst;
  bad.label = "maybe";
  CHECK(capture([&] { prepare(bad, cfg, words_vocab()); }).kind() == ErrorKind::kLabel);
  ModelConfig short_cfg = cfg;
  short_cfg.encoder.max_len = 4;
  CHECK(capture([&] { prepare(inst, short_cfg, words_vocab()); }).kind() == ErrorKind::kLength);
}

TEST_CASE("entity pooling") {
  const ModelConfig cfg = tiny_config();
  CounterRng rng(3);
  const ModelParams params = random_model(cfg, rng);
  for (int trial = 0; trial < 10; ++trial) {
    RelationInstance inst = oracle::random_instance(rng, 14, 2, 2, 3);
    const PreparedInstance p = prepare(inst, cfg, words_vocab());
    const Tensor base = forward(params, p, cfg);

    RelationInstance dup = inst;
    for (Entity& e : dup.entities) {
      const auto m = e.mentions;
      e.mentions.insert(e.mentions.end(), m.begin(), m.end());
    }
    CHECK(forward(params, prepare(dup, cfg, words_vocab()), cfg) == base);

    RelationInstance perm = inst;
    for (Entity& e : perm.entities) std::reverse(e.mentions.begin(), e.mentions.end());
    CHECK(forward(params, prepare(perm, cfg, words_vocab()), cfg) == base);
  }
}

TEST_CASE("single-mention entity representation is that GT row") {
  const ModelConfig cfg = tiny_config();
  CounterRng rng(5);
  const ModelParams params = random_model(cfg, rng);
  RelationInstance inst = oracle::random_instance(rng, 10, 1, 2, 1);
  for (Entity& e : inst.entities) e.mentions = {{e.mentions[0].begin, e.mentions[0].begin + 1}};
  const PreparedInstance p = prepare(inst, cfg, words_vocab());

  Tape tape;
  const ModelWeights<Var> w = params.map<Var>([&](const Tensor& t) { return tape.borrow(t); });
  DropoutStream off;
  ForwardTrace trace;
  forward(w, p, cfg, off, &trace);
  const Tensor x = embed(params.encoder.embedding, p.ids, cfg.encoder);
  const Tensor gt = graph_encode(x, p.mask, cfg.encoder, params.encoder);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t c = 0; c < 8; ++c) CHECK(trace.graph_rep.value()[s * 8 + c] == gt.at(p.slot_rows[s][0], c));
}

TEST_CASE("zero head gives uniform output and ln L loss") {
  const ModelConfig cfg = tiny_config();
  CounterRng rng(7);
  ModelParams params = random_model(cfg, rng);
  params.head.for_each([](const std::string&, Tensor& t) { t.fill(0.0); }, "");
  const PreparedInstance p = prepare(oracle::random_instance(rng, 12, 2, 2), cfg, words_vocab());
  const Tensor logits = forward(params, p, cfg);
  for (double v : logits.values()) CHECK(v == 0.0);
  for (double q : softmax(logits.values())) CHECK(q == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const PreparedInstance* batch[] = {&p};
  CHECK(loss_and_grads(batch, params, cfg).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("batch loss is a mean") {
  const ModelConfig cfg = tiny_config();
  CounterRng rng(11);
  const ModelParams params = random_model(cfg, rng);
  const PreparedInstance a = prepare(oracle::random_instance(rng, 12, 2, 2), cfg, words_vocab());
  const PreparedInstance b = prepare(oracle::random_instance(rng, 9, 1, 2), cfg, words_vocab());
  const PreparedInstance* once[] = {&a, &b};
  const PreparedInstance* twice[] = {&a, &b, &a, &b};
  CHECK(loss_and_grads(once, params, cfg).loss == doctest::Approx(loss_and_grads(twice, params, cfg).loss).epsilon(1e-14));
}

TEST_CASE("predict is argmax-consistent") {
  const std::vector<double> logits = {2.0, 1.0, 0.0};
  CHECK(argmax(logits) == 0);
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
  const ModelConfig cfg = tiny_config();
  CounterRng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams params = random_model(cfg, rng);
    const PreparedInstance p = prepare(oracle::random_instance(rng, 8 + rng.below(10), 2, 2), cfg, words_vocab());
    const Tensor z = forward(params, p, cfg);
    const auto q = softmax(z.values());
    double total = 0.0;
    for (double v : q) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(predict(params, p, cfg) == cfg.label_set[argmax(z.values())]);
  }
}

TEST_CASE("tokens outside every entity neighborhood cannot reach the GT contribution") {
  const ModelConfig cfg = tiny_config();
  CounterRng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams params = random_model(cfg, rng);
    RelationInstance inst = oracle::random_instance(rng, 16, 2, 2, 1);
    const PreparedInstance p = prepare(inst, cfg, words_vocab());
    std::set<std::size_t> reach;
    for (const auto& rows : p.slot_rows)
      for (std::size_t r : rows)
        for (std::size_t j : p.mask.row(r)) reach.insert(j);

    auto trace_of = [&](const PreparedInstance& q) {
      Tape tape;
      const ModelWeights<Var> w = params.map<Var>([&](const Tensor& t) { return tape.borrow(t); });
      DropoutStream off;
      ForwardTrace tr;
      forward(w, q, cfg, off, &tr);
      return std::pair{tr.sentence_rep.value(), tr.graph_rep.value()};
    };
    const auto [sent, graph] = trace_of(p);
    for (std::size_t j = 1; j < p.ids.size(); ++j) {
      if (reach.contains(j)) continue;
      PreparedInstance moved = p;
      moved.ids[j] = moved.ids[j] == 2 ? 3 : 2;
      const auto [sent2, graph2] = trace_of(moved);
      CHECK(graph2 == graph);
      CHECK(sent2 != sent);
    }
  }
}

TEST_CASE("cls mode changes only the GT side") {
  ModelConfig mean_cfg = tiny_config();
  ModelConfig cls_cfg = mean_cfg;
  cls_cfg.gt_sentence_mode = SentenceMode::kCls;
  CounterRng rng(19);
  const ModelParams mean_params = random_model(mean_cfg, rng);
  ModelParams cls_params = init_model(cls_cfg, 1);
  cls_params.encoder = mean_params.encoder;
  const PreparedInstance p = prepare(oracle::random_instance(rng, 12, 2, 2), mean_cfg, words_vocab());

  auto trace_of = [&](const ModelParams& params, const ModelConfig& cfg) {
    Tape tape;
    const ModelWeights<Var> w = params.map<Var>([&](const Tensor& t) { return tape.borrow(t); });
    DropoutStream off;
    ForwardTrace tr;
    forward(w, p, cfg, off, &tr);
    return std::pair{tr.sentence_rep.value(), tr.graph_rep.value()};
  };
  const auto [s1, g1] = trace_of(mean_params, mean_cfg);
  const auto [s2, g2] = trace_of(cls_params, cls_cfg);
  CHECK(s1 == s2);
  CHECK(g1.size() == 16);
  CHECK(g2.size() == 8);
  const Tensor gt = graph_encode(embed(mean_params.encoder.embedding, p.ids, mean_cfg.encoder), p.mask,
                                 mean_cfg.encoder, mean_params.encoder);
  for (std::size_t c = 0; c < 8; ++c) CHECK(g2[c] == gt.at(0, c));
}

TEST_CASE("ablation zeroes the GT contribution") {
  ModelConfig cfg = tiny_config();
  cfg.ablate_graph = true;
  CounterRng rng(23);
  const ModelParams params = random_model(cfg, rng);
  const PreparedInstance p = prepare(oracle::random_instance(rng, 12, 2, 2), cfg, words_vocab());
  const PreparedInstance* batch[] = {&p};
  const LossAndGrads lg = loss_and_grads(batch, params, cfg);
  for (double g : lg.grads.encoder.graph[0].ffn_in.values()) CHECK(g == 0.0);
  ModelParams other = params;
  other.encoder.graph[0].attention.query.fill(3.0);
  CHECK(forward(other, p, cfg) == forward(params, p, cfg));
}

TEST_CASE("every parameter tensor receives gradient") {
  const ModelConfig cfg = tiny_config();
  CounterRng rng(29);
  const ModelParams params = init_model(cfg, 5);
  std::vector<PreparedInstance> data;
  for (int i = 0; i < 4; ++i) data.push_back(prepare(oracle::random_instance(rng, 12, 2, 2), cfg, words_vocab()));
  std::vector<const PreparedInstance*> batch;
  for (const auto& d : data) batch.push_back(&d);
  const LossAndGrads lg = loss_and_grads(batch, params, cfg);
  lg.grads.for_each([](const std::string& name, const Tensor& g) {
    double total = 0.0;
    for (double v : g.values()) total += std::abs(v);
    INFO(name);
    CHECK(total > 0.0);
  });
}

TEST_CASE("full-model grad_check") {
  const ModelConfig cfg = tiny_config();
  CounterRng rng(31);
  ModelParams params = random_model(cfg, rng);
  std::vector<PreparedInstance> data;
  for (int i = 0; i < 2; ++i) data.push_back(prepare(oracle::random_instance(rng, 5, 1 + i, 2, 1), cfg, words_vocab()));
  std::vector<Tensor*> leaves;
  const auto index = leaf_index(params, leaves);
  const ScalarProgram program = [&](Tape&, std::span<const Var> vars) {
    const ModelWeights<Var> w = params.map<Var>([&](const Tensor& t) { return vars[index.at(&t)]; });
    DropoutStream off;
    std::vector<Var> logits;
    std::vector<std::size_t> gold;
    for (const auto& d : data) {
      logits.push_back(forward(w, d, cfg, off));
      gold.push_back(d.gold);
    }
    return ops::cross_entropy(ops::concat_rows(logits), gold);
  };
  const GradCheckReport report = grad_check(program, leaves, 1e-5);
  INFO(report.worst_tensor, " ", report.worst_index);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("dropout keys make training forward passes reproducible") {
  ModelConfig cfg = tiny_config();
  cfg.encoder.dropout_rate = 0.3;
  CounterRng rng(37);
  const ModelParams params = random_model(cfg, rng);
  const PreparedInstance p = prepare(oracle::random_instance(rng, 12, 2, 2), cfg, words_vocab());
  const PreparedInstance* batch[] = {&p};
  const double a = loss_and_grads(batch, params, cfg, 99).loss;
  CHECK(loss_and_grads(batch, params, cfg, 99).loss == a);
  CHECK(loss_and_grads(batch, params, cfg, 100).loss != a);
  CHECK(loss_and_grads(batch, params, cfg).loss != a);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg = tiny_config();
  cfg.neighbor_cap = 5;
  CounterRng rng(41);
  const Checkpoint ckpt{cfg, words_vocab(), random_model(cfg, rng)};
  std::stringstream first;
  write_checkpoint(first, ckpt);
  const std::string bytes = first.str();
  const Checkpoint back = read_checkpoint(first);
  CHECK(back.config == cfg);
  CHECK(back.vocab == ckpt.vocab);
  bool same = true;
  std::vector<const Tensor*> a, b;
  ckpt.params.for_each([&](const std::string&, const Tensor& t) { a.push_back(&t); });
  back.params.for_each([&](const std::string&, const Tensor& t) { b.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i) same = same && *a[i] == *b[i];
  CHECK(same);
  std::stringstream second;
  write_checkpoint(second, back);
  CHECK(second.str() == bytes);

  std::stringstream junk("not a checkpoint");
  CHECK(capture([&] { read_checkpoint(junk); }).kind() == ErrorKind::kParse);
  std::stringstream cut(bytes.substr(0, bytes.size() - 8));
  CHECK(capture([&] { read_checkpoint(cut); }).kind() == ErrorKind::kParse);
}
