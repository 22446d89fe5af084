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

#include "racc/aggregator/aggregator.h"

#include <cmath>
#include <stdexcept>

namespace racc::aggregator {

CrossAttentionBlock CrossAttentionBlock::create(const std::string& name,
                                                std::size_t d,
                                                std::size_t n_heads,
                                                std::mt19937_64& rng) {
  if (n_heads == 0 || d % n_heads != 0) {
    throw ShapeError(name + ": width " + std::to_string(d) +
                     " not divisible by " + std::to_string(n_heads) + " heads");
  }
  return CrossAttentionBlock{nn::LayerNorm::create(name + ".ln_q", d),
                             nn::LayerNorm::create(name + ".ln_ctx", d),
                             nn::AttentionWeights::create(name + ".attn", d, rng,
                                                          /*zero_output=*/true),
                             n_heads};
}

Var CrossAttentionBlock::operator()(Graph& g, const Var& query,
                                    const Var& context, const Tensor* gate,
                                    std::vector<Tensor>* trace) const {
  if (query.cols() != width() || context.cols() != width()) {
    throw ShapeError("cross-attention: query width " +
                     std::to_string(query.cols()) + ", context width " +
                     std::to_string(context.cols()) + ", block width " +
                     std::to_string(width()));
  }
  nn::AttentionOptions opts;
  opts.logit_gate = gate;
  opts.trace = trace;
  Var mixed = nn::multi_head_attention(g, attn, ln_query(g, query),
                                       ln_context(g, context), n_heads, opts);
  return add(query, mixed);
}

void CrossAttentionBlock::collect(std::vector<Parameter*>& out) {
  ln_query.collect(out);
  ln_context.collect(out);
  attn.collect(out);
}

void CrossAttentionBlock::collect(std::vector<const Parameter*>& out) const {
  ln_query.collect(out);
  ln_context.collect(out);
  attn.collect(out);
}

std::vector<Var> dcse_enhance(Graph& g, const CrossAttentionBlock& block,
                              std::span<const Var> doc_prompts,
                              const Var& theta_v, const Var& theta_q,
                              std::vector<Tensor>* trace) {
  if (doc_prompts.empty()) throw std::invalid_argument("dcse: no documents");
  Var queries = doc_prompts.size() == 1 ? doc_prompts.front()
                                        : concat(doc_prompts, 0);
  Var context = concat({theta_v, theta_q}, 0);
  Var enhanced = block(g, queries, context, nullptr, trace);
  std::vector<Var> out;
  out.reserve(doc_prompts.size());
  std::size_t row = 0;
  for (const Var& d : doc_prompts) {
    out.push_back(doc_prompts.size() == 1
                      ? enhanced
                      : slice_rows(enhanced, row, row + d.rows()));
    row += d.rows();
  }
  return out;
}

Tensor broadcast_scores(std::span<const double> scores, std::size_t n_heads,
                        std::size_t l_query, std::size_t l_d) {
  if (scores.empty()) throw std::invalid_argument("broadcast_scores: no scores");
  for (double s : scores) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument(
          "broadcast_scores: retrieval scores must be positive and finite, got " +
          std::to_string(s));
    }
  }
  const std::size_t cols = scores.size() * l_d;
  Tensor gate({n_heads, l_query, cols});
  auto data = gate.mutable_data();
  for (std::size_t h = 0; h < n_heads; ++h) {
    for (std::size_t r = 0; r < l_query; ++r) {
      double* row = data.data() + (h * l_query + r) * cols;
      for (std::size_t c = 0; c < cols; ++c) row[c] = scores[c / l_d];
    }
  }
  return gate;
}

RGCAStack RGCAStack::create(const std::string& name, std::size_t n_blocks,
                            std::size_t d, std::size_t n_heads,
                            std::mt19937_64& rng) {
  if (n_blocks == 0) throw std::invalid_argument("RGCA needs at least one block");
  RGCAStack stack;
  for (std::size_t i = 0; i < n_blocks; ++i) {
    stack.blocks.push_back(CrossAttentionBlock::create(
        name + "." + std::to_string(i), d, n_heads, rng));
  }
  return stack;
}

void RGCAStack::collect(std::vector<Parameter*>& out) {
  for (auto& b : blocks) b.collect(out);
}

void RGCAStack::collect(std::vector<const Parameter*>& out) const {
  for (const auto& b : blocks) b.collect(out);
}

Var rgca_forward(Graph& g, const RGCAStack& stack, const Var& theta_vq,
                 std::span<const Var> docs, std::span<const double> scores,
                 std::vector<Tensor>* trace) {
  if (docs.empty()) throw std::invalid_argument("rgca: no documents");
  if (scores.size() != docs.size()) {
    throw std::invalid_argument("rgca: " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(docs.size()) +
                                " documents");
  }
  const std::size_t l_d = docs.front().rows();
  for (const Var& d : docs) {
    if (d.rows() != l_d) {
      throw ShapeError("rgca: document prompts must share one length");
    }
  }
  Var context = docs.size() == 1 ? docs.front() : concat(docs, 0);
  Var x = theta_vq;
  for (const CrossAttentionBlock& block : stack.blocks) {
    Tensor gate;
    if (stack.gating) {
      gate = broadcast_scores(scores, block.n_heads, x.rows(), l_d);
    }
    x = block(g, x, context, stack.gating ? &gate : nullptr, trace);
  }
  return x;
}

}  // namespace racc::aggregator
