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
#include <functional>
#include <span>

#include "gtrel/numerics/tape.hpp"

namespace gtrel {

/// Builds a scalar on `tape` from leaves bound to the checked tensors, in the
/// order they were passed to grad_check.
using ScalarProgram = std::function<Var(Tape& tape, std::span<const Var> leaves)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients against central differences on every
/// coordinate of every tensor in `params`. Tensors are perturbed in place and
/// restored. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const ScalarProgram& f, std::span<Tensor* const> params, double step);

/// Single-tensor convenience form; returns the max relative error.
double grad_check(const std::function<Var(Tape&, Var)>& f, Tensor theta, double step);

}  // namespace gtrel
