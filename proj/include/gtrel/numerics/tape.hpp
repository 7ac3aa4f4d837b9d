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
#include <deque>
#include <functional>
#include <initializer_list>

#include "gtrel/numerics/tensor.hpp"

namespace gtrel {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient accumulated by the last backward pass; empty if the node does
  /// not require gradients or was not reached.
  const Tensor& grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const noexcept { return *tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so reverse insertion order is a valid topological order for backward.
class Tape {
 public:
  /// Receives the gradient of the node being replayed and pushes
  /// contributions into its parents through accumulate().
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  /// Borrowed leaf: the tape keeps a pointer, the caller keeps `value` alive
  /// and unmodified until the tape is discarded.
  Var parameter(const Tensor& value);
  /// Borrowed leaf that needs no gradient.
  Var borrow(const Tensor& value);

  /// Records an op output. `backward` is only retained when some parent
  /// requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, const std::vector<Var>& parents, Backward backward);

  const Tensor& value(Var v) const { return *nodes_[v.id_].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id_].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  /// Adds `delta` into the gradient of `v` (allocated on first use). No-op
  /// for nodes that do not require gradients.
  void accumulate(Var v, const Tensor& delta);
  /// Mutable gradient buffer for `v`, or nullptr if `v` needs no gradient.
  Tensor* grad_buffer(Var v);

  /// Seeds d(root)/d(root) = 1 for a single-element root and replays every
  /// reachable node once, newest first.
  void backward(Var root);
  void zero_grads();

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* value = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }
inline const Tensor& Var::grad() const { return tape_->grad(*this); }

}  // namespace gtrel
