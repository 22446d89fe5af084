// Copyright 2026 The RACC Authors. All Rights Reserved.
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

// Central finite differences against reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "racc/numerics/graph.h"

namespace racc::testing {

/// ||a - n|| / max(||a||, ||n||); zero when both vanish.
inline double relative_error(const Tensor& analytic, const Tensor& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  auto a = analytic.data();
  auto n = numeric.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

/// Loss as a function of graph leaves built from `inputs`.
using LeafLoss = std::function<Var(Graph&, std::span<const Var>)>;

/// Largest relative error over all inputs.
inline double check_leaves(const LeafLoss& loss, const std::vector<Tensor>& inputs,
                           double h = 1e-6) {
  Graph g;
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(g.variable(t));
  const Gradients grads = g.backward(loss(g, leaves));

  auto value_at = [&](const std::vector<Tensor>& xs) {
    Graph gf;
    std::vector<Var> vs;
    for (const Tensor& t : xs) vs.push_back(gf.constant(t));
    return loss(gf, vs).value().item();
  };

  double worst = 0.0;
  std::vector<Tensor> xs = inputs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Tensor numeric(xs[k].shape());
    auto data = xs[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double x0 = data[i];
      data[i] = x0 + h;
      const double up = value_at(xs);
      data[i] = x0 - h;
      const double down = value_at(xs);
      data[i] = x0;
      numeric.mutable_data()[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(grads.of(leaves[k]), numeric));
  }
  return worst;
}

/// Same for parameters owned elsewhere: `loss_value` re-runs the forward
/// pass, `analytic` returns gradients aligned with `params`.
inline double check_parameters(std::span<Parameter* const> params,
                               const std::function<double()>& loss_value,
                               const std::vector<Tensor>& analytic,
                               double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor numeric(params[k]->value.shape());
    auto data = params[k]->value.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double x0 = data[i];
      data[i] = x0 + h;
      const double up = loss_value();
      data[i] = x0 - h;
      const double down = loss_value();
      data[i] = x0;
      numeric.mutable_data()[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic[k], numeric));
  }
  return worst;
}

}  // namespace racc::testing
