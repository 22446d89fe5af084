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

// Layers composed from graph ops. Nothing here is fused; attention is
// slices, matmuls and a softmax per head.

#include <random>
#include <string>
#include <vector>

#include "racc/numerics/graph.h"

namespace racc::nn {

struct Linear {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out

  static Linear create(const std::string& name, std::size_t in, std::size_t out,
                       std::mt19937_64& rng, double stddev);
  static Linear zeros(const std::string& name, std::size_t in, std::size_t out);

  Var operator()(Graph& g, const Var& x) const;
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

struct LayerNorm {
  Parameter gamma;  // 1 x d
  Parameter beta;   // 1 x d

  static LayerNorm create(const std::string& name, std::size_t d);

  Var operator()(Graph& g, const Var& x) const;
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// Projection matrices of one multi-head attention layer (all d x d).
struct AttentionWeights {
  Parameter wq, wk, wv, wo;

  static AttentionWeights create(const std::string& name, std::size_t d,
                                 std::mt19937_64& rng, bool zero_output = false);

  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

struct AttentionOptions {
  /// Query i sees sequence keys j <= i; prefix keys are always visible.
  bool causal = false;
  /// Extra already-projected key/value rows placed ahead of the sequence
  /// keys (width d, heads laid out as contiguous column blocks).
  const Var* prefix_keys = nullptr;
  const Var* prefix_values = nullptr;
  /// Optional n_heads x Lq x Lk multiplicative gate on the scaled logits.
  const Tensor* logit_gate = nullptr;
  /// When set, receives one Lq x Lk probability matrix per head.
  std::vector<Tensor>* trace = nullptr;
};

/// softmax(gate * (Q K^T / sqrt(d_head)) + mask) V, projected by Wo.
Var multi_head_attention(Graph& g, const AttentionWeights& w,
                         const Var& query_input, const Var& kv_input,
                         std::size_t n_heads, const AttentionOptions& opts = {});

struct FeedForward {
  Linear up;
  Linear down;

  static FeedForward create(const std::string& name, std::size_t d,
                            std::size_t d_ff, std::mt19937_64& rng);

  Var operator()(Graph& g, const Var& x) const;
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// Sinusoidal position table for positions [offset, offset + rows).
Tensor sinusoidal_positions(std::size_t rows, std::size_t d,
                            std::size_t offset = 0);

}  // namespace racc::nn
