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

// Information aggregation: document prompts enhanced by the decoupled
// image/question prompts, then read by the joint prompt through a stack of
// cross-attention blocks whose logits are scaled by retrieval scores.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "racc/numerics/graph.h"
#include "racc/numerics/nn.h"

namespace racc::aggregator {

/// out = x + Wo * Attn(LN(x), LN(context)). Wo starts at zero, so a fresh
/// block is the identity on its query input.
struct CrossAttentionBlock {
  nn::LayerNorm ln_query;
  nn::LayerNorm ln_context;
  nn::AttentionWeights attn;
  std::size_t n_heads = 1;

  static CrossAttentionBlock create(const std::string& name, std::size_t d,
                                    std::size_t n_heads, std::mt19937_64& rng);

  std::size_t width() const { return attn.wq.value.rows(); }

  /// `gate`, when given, is n_heads x L_query x L_context.
  Var operator()(Graph& g, const Var& query, const Var& context,
                 const Tensor* gate = nullptr,
                 std::vector<Tensor>* trace = nullptr) const;

  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// DCSE. Document prompt rows (K * L_d) query concat(theta_v, theta_q);
/// the result is split back per document.
std::vector<Var> dcse_enhance(Graph& g, const CrossAttentionBlock& block,
                              std::span<const Var> doc_prompts,
                              const Var& theta_v, const Var& theta_q,
                              std::vector<Tensor>* trace = nullptr);

/// Tiles score k over document k's L_d key columns, every query row and
/// every head: n_heads x L_query x (K * L_d).
Tensor broadcast_scores(std::span<const double> scores, std::size_t n_heads,
                        std::size_t l_query, std::size_t l_d);

struct RGCAStack {
  std::vector<CrossAttentionBlock> blocks;
  /// When false the stack is plain cross-attention (scores ignored).
  bool gating = true;

  static RGCAStack create(const std::string& name, std::size_t n_blocks,
                          std::size_t d, std::size_t n_heads,
                          std::mt19937_64& rng);

  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// Runs theta_vq through every block against the concatenated document
/// prompts. Output has theta_vq's shape.
Var rgca_forward(Graph& g, const RGCAStack& stack, const Var& theta_vq,
                 std::span<const Var> docs, std::span<const double> scores,
                 std::vector<Tensor>* trace = nullptr);

}  // namespace racc::aggregator
