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
#include <vector>

#include "gtrel/numerics/tape.hpp"

// Differentiable ops over Tape nodes. Every op validates shapes and throws
// Error(kShape) naming both operands on mismatch.
namespace gtrel::ops {

/// a[m×k] · b[k×p].
Var matmul(Var a, Var b);
/// a[m×k] · b[p×k]ᵀ.
Var matmul_nt(Var a, Var b);

/// Elementwise, identical shapes.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a[m×k] + bias[k] on every row.
Var add_bias(Var a, Var bias);

/// Sum of every element, as a single-element tensor.
Var sum(Var a);

/// Concatenates matrices with equal row counts along the last axis.
Var concat_cols(std::span<const Var> parts);
/// Stacks matrices with equal column counts.
Var concat_rows(std::span<const Var> parts);
/// Columns [begin, end) of a.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Mean over the listed rows (repeats count with their multiplicity); 1×k.
Var mean_rows(Var a, std::span<const std::size_t> rows);
/// Row gather from a lookup table; backward scatter-adds.
Var gather_rows(Var table, std::span<const std::size_t> rows);

Var softmax_rows(Var a);
/// Replaces entries where allowed[i*cols+j] == 0 with -inf. Every row must
/// keep at least one entry.
Var mask_scores(Var scores, std::span<const std::uint8_t> allowed);

Var layer_norm(Var x, Var gain, Var bias, double eps);

/// Exact GELU, x·Φ(x).
Var gelu(Var a);

/// Inverted dropout. Element j is kept iff CounterRng(key).uniform_at(j) >= rate;
/// rate 0 returns `a` itself.
Var dropout(Var a, double rate, std::uint64_t key);

/// Mean over rows of -log softmax(logits)[gold]; single-element result.
Var cross_entropy(Var logits, std::span<const std::size_t> gold);

}  // namespace gtrel::ops
