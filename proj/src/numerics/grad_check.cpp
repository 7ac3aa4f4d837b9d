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

#include "gtrel/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gtrel/error.hpp"

namespace gtrel {
namespace {

double evaluate(const ScalarProgram& f, std::span<Tensor* const> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (Tensor* p : params) leaves.push_back(tape.constant(*p));
  const Var out = f(tape, leaves);
  if (out.value().size() != 1) {
    fail(ErrorKind::kShape, "grad_check: program must return a single element, got " +
                                shape_string(out.value().shape()));
  }
  const double v = out.value()[0];
  if (!std::isfinite(v)) fail(ErrorKind::kEvaluation, "grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarProgram& f, std::span<Tensor* const> params, double step) {
  if (!(step > 0.0 && step <= 1e-3)) {
    fail(ErrorKind::kConfig, "grad_check: step must lie in (0, 1e-3]");
  }
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (Tensor* p : params) leaves.push_back(tape.parameter(*p));
    const Var out = f(tape, leaves);
    if (out.value().size() != 1 || !std::isfinite(out.value()[0])) {
      fail(ErrorKind::kEvaluation, "grad_check: objective is not a finite scalar");
    }
    tape.backward(out);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor& g = leaves[i].grad();
      analytic.push_back(g.size() == params[i]->size() ? g : Tensor(params[i]->shape()));
    }
  }

  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& theta = *params[t];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double plus = evaluate(f, params);
      theta[i] = saved - step;
      const double minus = evaluate(f, params);
      theta[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double exact = analytic[t][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double rel = std::abs(exact - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_tensor = t;
        report.worst_index = i;
        report.worst_analytic = exact;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

double grad_check(const std::function<Var(Tape&, Var)>& f, Tensor theta, double step) {
  Tensor* params[] = {&theta};
  return grad_check([&f](Tape& tape, std::span<const Var> leaves) { return f(tape, leaves[0]); },
                    params, step)
      .max_relative_error;
}

}  // namespace gtrel
