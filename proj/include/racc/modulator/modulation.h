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

// Modulation generation: m small MLPs turn the aggregated joint prompt into
// one key/value prefix per self-attention layer of the base model.

#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "racc/numerics/graph.h"
#include "racc/numerics/nn.h"
#include "racc/tinylm/model.h"

namespace racc::modulator {

using tinylm::PrefixKV;

/// d_hyper -> hidden -> 2 * d_base, ReLU between, output layer zero.
struct PrefixMLP {
  nn::Linear hidden;
  nn::Linear out;

  Var operator()(Graph& g, const Var& x) const;
};

struct MLPSet {
  std::vector<PrefixMLP> mlps;

  static MLPSet create(std::size_t m, std::size_t d_hyper, std::size_t d_hidden,
                       std::size_t d_base, std::mt19937_64& rng);

  std::size_t layers() const { return mlps.size(); }
  std::size_t d_base() const;

  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// Layer l's keys and values are the two halves of MLP_l applied row-wise.
PrefixKV generate_modulation(Graph& g, const Var& theta_vq_star,
                             const MLPSet& mlps,
                             const tinylm::ModelConfig& base);

/// Decoder inputs and shifted targets for teacher forcing:
/// ([bos, a_1..a_n], [a_1..a_n, eos]).
std::pair<std::vector<int>, std::vector<int>> teacher_forcing(
    std::span<const int> answer);

/// Mean cross-entropy over rows whose target is not -1.
Var lm_loss(const Var& logits, std::span<const int> targets);

}  // namespace racc::modulator
