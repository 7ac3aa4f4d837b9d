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


#include <map>
#include <set>

#include "doctest.h"
#include "gtrel/encoders.hpp"
#include "gtrel/error.hpp"
#include "gtrel/numerics/grad_check.hpp"
#include "gtrel/numerics/ops.hpp"
#include "oracles.hpp"

using namespace gtrel;
using oracle::random_tensor;

namespace {

EncoderConfig small_config(std::size_t h, std::size_t heads, std::size_t nx, std::size_t ny) {
  EncoderConfig cfg;
  cfg.width = h;
  cfg.heads = heads;
  cfg.ffn_width = 2 * h;
  cfg.transformer_blocks = nx;
  cfg.graph_blocks = ny;
  cfg.dropout_rate = 0.0;
  cfg.max_len = 16;
  cfg.vocab_size = 10;
  return cfg;
}

// Random weights on a scale where attention is far from uniform.
EncoderParams random_encoder(const EncoderConfig& cfg, CounterRng& rng) {
  EncoderParams p = init_encoder(cfg, rng());
  p.for_each([&](const std::string& name, Tensor& t) {
    const bool norm = name.find("norm") != std::string::npos;
    if (norm && name.ends_with("gain")) {
      for (double& v : t.values()) v = 1.0 + 0.2 * (2.0 * rng.uniform() - 1.0);
    } else {
      t = random_tensor(t.shape(), rng, norm ? 0.1 : 0.6);
    }
  });
  return p;
}

std::vector<std::vector<bool>> as_matrix(const NeighborMask& mask) {
  std::vector<std::vector<bool>> m(mask.tokens(), std::vector<bool>(mask.tokens()));
  for (std::size_t i = 0; i < mask.tokens(); ++i)
    for (std::size_t j = 0; j < mask.tokens(); ++j) m[i][j] = mask.allows(i, j);
  return m;
}

NeighborMask random_mask(std::size_t t, CounterRng& rng, double density) {
  NeighborMask mask(t);
  for (std::size_t i = 0; i < t; ++i) {
    mask.allow(i, i);
    for (std::size_t j = 0; j < t; ++j)
      if (rng.uniform() < density) mask.allow(i, j);
  }
  return mask;
}

bool row_identical(const Tensor& a, const Tensor& b, std::size_t r) {
  for (std::size_t c = 0; c < a.cols(); ++c)
    if (a.at(r, c) != b.at(r, c)) return false;
  return true;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EncoderConfig{};
  cfg.graph_blocks = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EncoderConfig{};
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("initialization is seeded, finite and bounded") {
  const EncoderConfig cfg;
  const EncoderParams a = init_encoder(cfg, 7);
  const EncoderParams b = init_encoder(cfg, 7);
  const EncoderParams c = init_encoder(cfg, 8);
  CHECK(a.embedding.tokens == b.embedding.tokens);
  CHECK(a.transformer[1].ffn_out == b.transformer[1].ffn_out);
  CHECK(a.embedding.tokens != c.embedding.tokens);
  CHECK(a.transformer[0].attention.query != a.graph[0].attention.query);
  CHECK(a.transformer.size() == 2);
  CHECK(a.graph.size() == 2);
  const double bound = 10.0 * std::sqrt(static_cast<double>(cfg.width));
  for (const Tensor* t : {&a.embedding.tokens, &a.embedding.positions}) {
    CHECK(t->all_finite());
    for (std::size_t r = 0; r < t->rows(); ++r) {
      double norm = 0.0;
      for (double v : t->row(r)) norm += v * v;
      CHECK(std::sqrt(norm) < bound);
    }
  }
  a.for_each([](const std::string&, const Tensor& t) {
    for (double v : t.values()) CHECK(std::abs(v) <= 1.0);
  });
}

TEST_CASE("embed") {
  const EncoderConfig cfg = small_config(4, 2, 1, 1);
  CounterRng rng(3);
  const EncoderParams p = random_encoder(cfg, rng);
  const std::vector<std::size_t> none;
  const Tensor empty = embed(p.embedding, none, cfg);
  CHECK(empty.shape() == Shape{0, 4});

  const std::vector<std::size_t> same = {5, 5};
  const Tensor e = embed(p.embedding, same, cfg);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(e.at(1, c) - e.at(0, c) ==
          doctest::Approx(p.embedding.positions.at(1, c) - p.embedding.positions.at(0, c)).epsilon(1e-14));
    CHECK(e.at(0, c) == p.embedding.tokens.at(5, c) + p.embedding.positions.at(0, c));
  }

  const std::vector<std::size_t> unknown = {99, kUnkId};
  const Tensor u = embed(p.embedding, unknown, cfg);
  for (std::size_t c = 0; c < 4; ++c) CHECK(u.at(0, c) == p.embedding.tokens.at(kUnkId, c) + p.embedding.positions.at(0, c));

  const std::vector<std::size_t> long_ids(cfg.max_len + 1, 2);
  Error err(ErrorKind::kIo, "");
  try {
    embed(p.embedding, long_ids, cfg);
  } catch (const Error& e2) {
    err = e2;
  }
  CHECK(err.kind() == ErrorKind::kLength);
}

TEST_CASE("zero weights collapse each block to two layer norms") {
  const EncoderConfig cfg = small_config(4, 2, 1, 1);
  EncoderParams p = init_encoder(cfg, 1);
  p.for_each([](const std::string& name, Tensor& t) { t.fill(name.ends_with("gain") ? 1.0 : 0.0); });
  CounterRng rng(5);
  const Tensor x = random_tensor({3, 4}, rng);
  const Tensor ones({4}, 1.0), zeros({4});
  const Tensor expect = oracle::layer_norm_oracle(oracle::layer_norm_oracle(x, ones, zeros, 1e-12), ones, zeros, 1e-12);
  CHECK(max_abs_diff(transformer_encode(x, cfg, p), expect) < 1e-12);
  CHECK(max_abs_diff(graph_encode(x, NeighborMask::complete(3), cfg, p), expect) < 1e-12);
}

TEST_CASE("eval mode is deterministic") {
  const EncoderConfig cfg = small_config(8, 2, 2, 2);
  CounterRng rng(9);
  const EncoderParams p = random_encoder(cfg, rng);
  const Tensor x = random_tensor({5, 8}, rng);
  CHECK(transformer_encode(x, cfg, p) == transformer_encode(x, cfg, p));
  const NeighborMask mask = random_mask(5, rng, 0.3);
  CHECK(graph_encode(x, mask, cfg, p) == graph_encode(x, mask, cfg, p));
}

TEST_CASE("single block matches the composed scalar oracle") {
  const EncoderConfig cfg = small_config(4, 1, 1, 1);
  CounterRng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const EncoderParams p = random_encoder(cfg, rng);
    const Tensor x = random_tensor({2, 4}, rng);
    CHECK(max_abs_diff(transformer_encode(x, cfg, p), oracle::block_oracle(x, p.transformer[0], 1, nullptr)) <= 1e-12);
  }
  const EncoderConfig wide = small_config(8, 2, 2, 2);
  for (int trial = 0; trial < 5; ++trial) {
    const EncoderParams p = random_encoder(wide, rng);
    const Tensor x = random_tensor({6, 8}, rng);
    const NeighborMask mask = random_mask(6, rng, 0.3);
    const auto allowed = as_matrix(mask);
    Tensor expect = x;
    for (const auto& block : p.graph) expect = oracle::block_oracle(expect, block, 2, &allowed);
    CHECK(max_abs_diff(graph_encode(x, mask, wide, p), expect) <= 1e-12);
  }
}

TEST_CASE("complete mask makes the graph encoder a transformer encoder") {
  CounterRng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const EncoderConfig cfg = small_config(8, 2, 2, 2);
    EncoderParams p = random_encoder(cfg, rng);
    p.graph = p.transformer;
    const std::size_t t = 1 + rng.below(8);
    const Tensor x = random_tensor({t, 8}, rng);
    const Tensor a = transformer_encode(x, cfg, p);
    const Tensor b = graph_encode(x, NeighborMask::complete(t), cfg, p);
    CHECK(a.shape() == x.shape());
    CHECK(max_abs_diff(a, b) <= 1e-9);
  }
}

TEST_CASE("graph encoder receptive field follows the mask hops") {
  CounterRng rng(17);
  for (std::size_t blocks : {1u, 2u}) {
    const EncoderConfig cfg = small_config(8, 2, 1, blocks);
    for (int trial = 0; trial < 10; ++trial) {
      const EncoderParams p = random_encoder(cfg, rng);
      const std::size_t t = 4 + rng.below(6);
      const NeighborMask mask = random_mask(t, rng, 0.2);
      const Tensor x = random_tensor({t, 8}, rng);
      const Tensor base = graph_encode(x, mask, cfg, p);
      for (std::size_t i = 0; i < t; ++i) {
        std::set<std::size_t> reach{i};
        for (std::size_t hop = 0; hop < blocks; ++hop) {
          std::set<std::size_t> next = reach;
          for (std::size_t k : reach)
            for (std::size_t j : mask.row(k)) next.insert(j);
          reach = next;
        }
        for (std::size_t j = 0; j < t; ++j) {
          Tensor moved = x;
          for (std::size_t c = 0; c < 8; ++c) moved.at(j, c) += 0.5;
          const Tensor out = graph_encode(moved, mask, cfg, p);
          CHECK(row_identical(base, out, i) == !reach.contains(j));
        }
      }
    }
  }
}

TEST_CASE("whole-encoder gradients pass grad_check") {
  const EncoderConfig cfg = small_config(4, 2, 1, 1);
  CounterRng rng(19);
  EncoderParams p = random_encoder(cfg, rng);
  const Tensor r1 = random_tensor({3, 4}, rng), r2 = random_tensor({3, 4}, rng);
  const std::vector<std::size_t> ids = {1, 4, 7};
  NeighborMask mask(3);
  for (auto [a, b] : {std::pair{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 0}}) mask.allow(a, b);

  std::vector<Tensor*> leaves;
  std::map<const Tensor*, std::size_t> index;
  p.for_each([&](const std::string&, Tensor& t) {
    index[&t] = leaves.size();
    leaves.push_back(&t);
  });
  const ScalarProgram program = [&](Tape& tape, std::span<const Var> vars) {
    const EncoderWeights<Var> w = p.map<Var>([&](const Tensor& t) { return vars[index.at(&t)]; });
    DropoutStream off;
    const Var x = embed(w.embedding, ids, cfg);
    const Var a = transformer_encode(x, w.transformer, cfg, off);
    const Var b = graph_encode(x, mask, w.graph, cfg, off);
    return ops::add(ops::sum(ops::mul(a, tape.constant(r1))), ops::sum(ops::mul(b, tape.constant(r2))));
  };
  const GradCheckReport report = grad_check(program, leaves, 1e-5);
  INFO(report.worst_tensor, " ", report.worst_index);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("dropout stream") {
  Tape tape;
  CounterRng rng(23);
  const Var x = tape.constant(random_tensor({4, 6}, rng));
  DropoutStream off;
  CHECK(off.apply(x).id() == x.id());
  DropoutStream a(0.5, 42), b(0.5, 42);
  const Var a1 = a.apply(x), a2 = a.apply(x);
  CHECK(a1.value() == b.apply(x).value());
  CHECK(a1.value() != a2.value());
}
