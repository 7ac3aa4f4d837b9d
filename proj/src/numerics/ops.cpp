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

#include "gtrel/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gtrel/error.hpp"
#include "gtrel/numerics/rng.hpp"

namespace gtrel::ops {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap view(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  fail(ErrorKind::kShape, std::string(op) + ": incompatible shapes " +
                              shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 1 && t.rank() != 2) {
    fail(ErrorKind::kShape, std::string(op) + ": expected a matrix, got " +
                                shape_string(t.shape()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  if (av.cols() != bv.rows()) shape_mismatch("matmul", av, bv);
  Tensor out({av.rows(), bv.cols()});
  view(out).noalias() = view(av) * view(bv);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) view(*da).noalias() += view(g) * view(b.value()).transpose();
    if (Tensor* db = tape.grad_buffer(b)) view(*db).noalias() += view(a.value()).transpose() * view(g);
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul_nt", av);
  require_matrix("matmul_nt", bv);
  if (av.cols() != bv.cols()) shape_mismatch("matmul_nt", av, bv);
  Tensor out({av.rows(), bv.rows()});
  view(out).noalias() = view(av) * view(bv).transpose();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) view(*da).noalias() += view(g) * view(b.value());
    if (Tensor* db = tape.grad_buffer(b)) view(*db).noalias() += view(g).transpose() * view(a.value());
  });
}

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_mismatch("add", av, bv);
  Tensor out = av;
  out += bv;
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_mismatch("mul", av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * b.value()[i];
    }
    if (Tensor* db = tape.grad_buffer(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += factor * g[i];
    }
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  require_matrix("add_bias", av);
  if (bv.size() != av.cols() || bv.rows() != 1) shape_mismatch("add_bias", av, bv);
  Tensor out = av;
  const std::size_t cols = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) row[c] += bv[c];
  }
  return a.tape().record(std::move(out), {a, bias}, [a, bias, cols](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    if (Tensor* db = tape.grad_buffer(bias)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < cols; ++c) (*db)[c] += row[c];
      }
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.tape().record(Tensor({1}, {total}), {a}, [a](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) {
      for (double& v : da->values()) v += g[0];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::kShape, "concat_cols: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix("concat_cols", p.value());
    if (p.value().rows() != rows) shape_mismatch("concat_cols", parts.front().value(), p.value());
    total += p.value().cols();
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), inputs, [inputs, rows](Tape& tape, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t cols = p.value().cols();
      if (Tensor* dp = tape.grad_buffer(p)) {
        for (std::size_t r = 0; r < rows; ++r) {
          auto src = g.row(r).subspan(offset, cols);
          auto dst = dp->row(r);
          for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
      }
      offset += cols;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::kShape, "concat_rows: no inputs");
  const std::size_t cols = parts.front().value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix("concat_rows", p.value());
    if (p.value().cols() != cols) shape_mismatch("concat_rows", parts.front().value(), p.value());
    total += p.value().rows();
  }
  std::vector<double> data;
  data.reserve(total * cols);
  for (const Var& p : parts) data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(Tensor({total, cols}, std::move(data)), inputs,
                                     [inputs](Tape& tape, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t n = p.value().size();
      if (Tensor* dp = tape.grad_buffer(p)) {
        for (std::size_t i = 0; i < n; ++i) (*dp)[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix("slice_cols", av);
  if (begin > end || end > av.cols()) {
    fail(ErrorKind::kShape, "slice_cols: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") outside " + shape_string(av.shape()));
  }
  const std::size_t rows = av.rows();
  const std::size_t width = end - begin;
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = av.row(r).subspan(begin, width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return a.tape().record(std::move(out), {a}, [a, begin, width, rows](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) {
      for (std::size_t r = 0; r < rows; ++r) {
        auto dst = da->row(r).subspan(begin, width);
        auto src = g.row(r);
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    }
  });
}

Var mean_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& av = a.value();
  require_matrix("mean_rows", av);
  if (rows.empty()) fail(ErrorKind::kShape, "mean_rows: empty row subset");
  const std::size_t cols = av.cols();
  for (std::size_t r : rows) {
    if (r >= av.rows()) {
      fail(ErrorKind::kIndex, "mean_rows: row " + std::to_string(r) + " outside " +
                                  shape_string(av.shape()));
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  Tensor out({1, cols});
  for (std::size_t r : rows) {
    auto src = av.row(r);
    for (std::size_t c = 0; c < cols; ++c) out[c] += src[c];
  }
  for (double& v : out.values()) v *= inv;
  std::vector<std::size_t> picked(rows.begin(), rows.end());
  return a.tape().record(std::move(out), {a}, [a, picked, inv, cols](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) {
      for (std::size_t r : picked) {
        auto dst = da->row(r);
        for (std::size_t c = 0; c < cols; ++c) dst[c] += inv * g[c];
      }
    }
  });
}

Var gather_rows(Var table, std::span<const std::size_t> rows) {
  const Tensor& tv = table.value();
  require_matrix("gather_rows", tv);
  const std::size_t cols = tv.cols();
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= tv.rows()) {
      fail(ErrorKind::kIndex, "gather_rows: row " + std::to_string(rows[i]) + " outside " +
                                  shape_string(tv.shape()));
    }
    auto src = tv.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::size_t> picked(rows.begin(), rows.end());
  return table.tape().record(std::move(out), {table}, [table, picked, cols](Tape& tape, const Tensor& g) {
    if (Tensor* dt = tape.grad_buffer(table)) {
      for (std::size_t i = 0; i < picked.size(); ++i) {
        auto dst = dt->row(picked[i]);
        auto src = g.row(i);
        for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
      }
    }
  });
}

namespace {

// Row-wise softmax backward: dx = y ⊙ (g − Σ g⊙y).
void softmax_backward(const Tensor& y, const Tensor& g, Tensor& dx) {
  const std::size_t cols = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto gr = g.row(r);
    auto dr = dx.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
    for (std::size_t c = 0; c < cols; ++c) dr[c] += yr[c] * (gr[c] - dot);
  }
}

}  // namespace

Var softmax_rows(Var a) {
  const Tensor& av = a.value();
  require_matrix("softmax_rows", av);
  const std::size_t cols = av.cols();
  Tensor out(av.shape());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto src = av.row(r);
    auto dst = out.row(r);
    const double peak = *std::max_element(src.begin(), src.end());
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(src[c] - peak);
      total += dst[c];
    }
    for (std::size_t c = 0; c < cols; ++c) dst[c] /= total;
  }
  Tensor saved = a.tape().requires_grad(a) ? out : Tensor();
  return a.tape().record(std::move(out), {a}, [a, y = std::move(saved)](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) softmax_backward(y, g, *da);
  });
}

Var mask_scores(Var scores, std::span<const std::uint8_t> allowed) {
  const Tensor& sv = scores.value();
  require_matrix("mask_scores", sv);
  if (allowed.size() != sv.size()) {
    fail(ErrorKind::kShape, "mask_scores: mask of " + std::to_string(allowed.size()) +
                                " entries for scores " + shape_string(sv.shape()));
  }
  const std::size_t cols = sv.cols();
  Tensor out = sv;
  for (std::size_t r = 0; r < sv.rows(); ++r) {
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (allowed[r * cols + c]) {
        any = true;
      } else {
        out[r * cols + c] = -std::numeric_limits<double>::infinity();
      }
    }
    if (!any) fail(ErrorKind::kGraph, "mask_scores: row " + std::to_string(r) + " has no allowed key");
  }
  std::vector<std::uint8_t> keep(allowed.begin(), allowed.end());
  return scores.tape().record(std::move(out), {scores}, [scores, keep = std::move(keep)](Tape& tape, const Tensor& g) {
    if (Tensor* ds = tape.grad_buffer(scores)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (keep[i]) (*ds)[i] += g[i];
      }
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::kConfig, "layer_norm: eps must be positive");
  const Tensor& xv = x.value();
  require_matrix("layer_norm", xv);
  const std::size_t rows = xv.rows();
  const std::size_t cols = xv.cols();
  if (gain.value().size() != cols) shape_mismatch("layer_norm", xv, gain.value());
  if (bias.value().size() != cols) shape_mismatch("layer_norm", xv, bias.value());
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();

  Tensor normalized(xv.shape());
  std::vector<double> inv_std(rows);
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = xv.row(r);
    double mean = 0.0;
    for (double v : src) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : src) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto nr = normalized.row(r);
    auto orow = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      nr[c] = (src[c] - mean) * inv_std[r];
      orow[c] = nr[c] * gv[c] + bv[c];
    }
  }
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& tape, const Tensor& g) {
        const std::size_t rows = normalized.rows();
        const std::size_t cols = normalized.cols();
        if (Tensor* dg = tape.grad_buffer(gain)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) (*dg)[c] += g.at(r, c) * normalized.at(r, c);
          }
        }
        if (Tensor* db = tape.grad_buffer(bias)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) (*db)[c] += g.at(r, c);
          }
        }
        if (Tensor* dx = tape.grad_buffer(x)) {
          const Tensor& gv = gain.value();
          const double n = static_cast<double>(cols);
          std::vector<double> dxhat(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              dxhat[c] = g.at(r, c) * gv[c];
              mean_d += dxhat[c];
              mean_dx += dxhat[c] * normalized.at(r, c);
            }
            mean_d /= n;
            mean_dx /= n;
            auto dr = dx->row(r);
            for (std::size_t c = 0; c < cols; ++c) {
              dr[c] += inv_std[r] * (dxhat[c] - mean_d - normalized.at(r, c) * mean_dx);
            }
          }
        }
      });
}

Var gelu(Var a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * kInvSqrt2));
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor& g) {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    if (Tensor* da = tape.grad_buffer(a)) {
      const Tensor& x = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
        (*da)[i] += g[i] * (cdf + x[i] * pdf);
      }
    }
  });
}

Var dropout(Var a, double rate, std::uint64_t key) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::kConfig, "dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return a;
  const CounterRng rng(key);
  const double keep_scale = 1.0 / (1.0 - rate);
  const Tensor& av = a.value();
  Tensor factor(av.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    factor[i] = rng.uniform_at(i) >= rate ? keep_scale : 0.0;
    out[i] = av[i] * factor[i];
  }
  return a.tape().record(std::move(out), {a}, [a, factor = std::move(factor)](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_buffer(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * factor[i];
    }
  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> gold) {
  const Tensor& lv = logits.value();
  require_matrix("cross_entropy", lv);
  const std::size_t batch = lv.rows();
  const std::size_t labels = lv.cols();
  if (gold.size() != batch) {
    fail(ErrorKind::kShape, "cross_entropy: " + std::to_string(gold.size()) +
                                " gold labels for logits " + shape_string(lv.shape()));
  }
  if (batch == 0) fail(ErrorKind::kShape, "cross_entropy: empty batch");
  Tensor probs(lv.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    if (gold[r] >= labels) {
      fail(ErrorKind::kIndex, "cross_entropy: gold index " + std::to_string(gold[r]) +
                                  " out of range for " + std::to_string(labels) + " labels");
    }
    auto src = lv.row(r);
    auto pr = probs.row(r);
    const double peak = *std::max_element(src.begin(), src.end());
    double total = 0.0;
    for (std::size_t c = 0; c < labels; ++c) total += std::exp(src[c] - peak);
    const double log_total = std::log(total) + peak;
    for (std::size_t c = 0; c < labels; ++c) pr[c] = std::exp(src[c] - log_total);
    loss += log_total - src[gold[r]];
  }
  loss /= static_cast<double>(batch);
  std::vector<std::size_t> targets(gold.begin(), gold.end());
  return logits.tape().record(
      Tensor({1}, {loss}), {logits},
      [logits, probs = std::move(probs), targets = std::move(targets)](Tape& tape, const Tensor& g) {
        if (Tensor* dl = tape.grad_buffer(logits)) {
          const double factor = g[0] / static_cast<double>(targets.size());
          const std::size_t labels = probs.cols();
          for (std::size_t r = 0; r < targets.size(); ++r) {
            for (std::size_t c = 0; c < labels; ++c) {
              const double onehot = c == targets[r] ? 1.0 : 0.0;
              dl->at(r, c) += factor * (probs.at(r, c) - onehot);
            }
          }
        }
      });
}

}  // namespace gtrel::ops
