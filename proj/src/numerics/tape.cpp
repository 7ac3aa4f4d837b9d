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

#include "gtrel/numerics/tape.hpp"

#include "gtrel/error.hpp"

namespace gtrel {

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  Node& stored = nodes_.back();
  if (stored.value == nullptr) stored.value = &stored.owned;
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  return push(std::move(node));
}

Var Tape::variable(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::parameter(const Tensor& value) {
  Node node;
  node.value = &value;
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::borrow(const Tensor& value) {
  Node node;
  node.value = &value;
  return push(std::move(node));
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward backward) {
  Node node;
  node.owned = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) fail(ErrorKind::kConfig, "op mixes nodes from different tapes");
    node.requires_grad = node.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

Tensor* Tape::grad_buffer(Var v) {
  Node& node = nodes_[v.id_];
  if (!node.requires_grad) return nullptr;
  if (node.grad.shape() != node.value->shape()) node.grad = Tensor(node.value->shape());
  return &node.grad;
}

void Tape::accumulate(Var v, const Tensor& delta) {
  if (Tensor* g = grad_buffer(v)) *g += delta;
}

void Tape::zero_grads() {
  for (Node& node : nodes_) node.grad = Tensor();
}

void Tape::backward(Var root) {
  if (root.tape_ != this) fail(ErrorKind::kConfig, "backward root belongs to another tape");
  if (value(root).size() != 1) {
    fail(ErrorKind::kShape, "backward root must be a single element, got " +
                                shape_string(value(root).shape()));
  }
  Tensor* seed = grad_buffer(root);
  if (seed == nullptr) return;
  (*seed)[0] += 1.0;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.size() == 0) continue;
    // Closures only write into earlier nodes, so node.grad is stable here.
    node.backward(*this, node.grad);
  }
}

}  // namespace gtrel
