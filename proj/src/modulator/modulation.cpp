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

#include "racc/modulator/modulation.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "racc/tinylm/vocab.h"

namespace racc::modulator {

Var PrefixMLP::operator()(Graph& g, const Var& x) const {
  return out(g, relu(hidden(g, x)));
}

MLPSet MLPSet::create(std::size_t m, std::size_t d_hyper, std::size_t d_hidden,
                      std::size_t d_base, std::mt19937_64& rng) {
  if (m == 0) throw std::invalid_argument("MLPSet needs at least one layer");
  MLPSet set;
  for (std::size_t l = 0; l < m; ++l) {
    const std::string name = "mlp." + std::to_string(l);
    set.mlps.push_back(PrefixMLP{
        nn::Linear::create(name + ".hidden", d_hyper, d_hidden, rng,
                           1.0 / std::sqrt(static_cast<double>(d_hyper))),
        nn::Linear::zeros(name + ".out", d_hidden, 2 * d_base)});
  }
  return set;
}

std::size_t MLPSet::d_base() const {
  return mlps.empty() ? 0 : mlps.front().out.weight.value.cols() / 2;
}

void MLPSet::collect(std::vector<Parameter*>& out) {
  for (auto& m : mlps) {
    m.hidden.collect(out);
    m.out.collect(out);
  }
}

void MLPSet::collect(std::vector<const Parameter*>& out) const {
  for (const auto& m : mlps) {
    m.hidden.collect(out);
    m.out.collect(out);
  }
}

PrefixKV generate_modulation(Graph& g, const Var& theta_vq_star,
                             const MLPSet& mlps,
                             const tinylm::ModelConfig& base) {
  if (mlps.layers() != base.prefix_layers()) {
    throw ShapeError("modulation: " + std::to_string(mlps.layers()) +
                     " MLPs for a base model with m = " +
                     std::to_string(base.prefix_layers()));
  }
  if (mlps.d_base() != base.d_model) {
    throw ShapeError("modulation: MLPs emit width " +
                     std::to_string(mlps.d_base()) + ", base width is " +
                     std::to_string(base.d_model));
  }
  const std::size_t d = base.d_model;
  PrefixKV kv;
  for (const PrefixMLP& mlp : mlps.mlps) {
    Var both = mlp(g, theta_vq_star);
    kv.keys.push_back(slice_cols(both, 0, d));
    kv.values.push_back(slice_cols(both, d, 2 * d));
  }
  return kv;
}

std::pair<std::vector<int>, std::vector<int>> teacher_forcing(
    std::span<const int> answer) {
  if (answer.empty()) throw std::invalid_argument("empty answer");
  std::vector<int> inputs{tinylm::Vocabulary::kBos};
  inputs.insert(inputs.end(), answer.begin(), answer.end());
  std::vector<int> targets(answer.begin(), answer.end());
  targets.push_back(tinylm::Vocabulary::kEos);
  return {std::move(inputs), std::move(targets)};
}

Var lm_loss(const Var& logits, std::span<const int> targets) {
  if (std::none_of(targets.begin(), targets.end(),
                   [](int t) { return t >= 0; })) {
    throw std::invalid_argument("lm_loss: no answer tokens to score");
  }
  return cross_entropy(logits, targets);
}

}  // namespace racc::modulator
