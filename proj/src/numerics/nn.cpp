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

#include "racc/numerics/nn.h"

#include <cmath>
#include <limits>
#include <optional>

namespace racc::nn {

Linear Linear::create(const std::string& name, std::size_t in, std::size_t out,
                      std::mt19937_64& rng, double stddev) {
  return Linear{Parameter{name + ".weight", Tensor::randn(in, out, stddev, rng)},
                Parameter{name + ".bias", Tensor::zeros(1, out)}};
}

Linear Linear::zeros(const std::string& name, std::size_t in, std::size_t out) {
  return Linear{Parameter{name + ".weight", Tensor::zeros(in, out)},
                Parameter{name + ".bias", Tensor::zeros(1, out)}};
}

Var Linear::operator()(Graph& g, const Var& x) const {
  return add(matmul(x, g.param(weight)), g.param(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

void Linear::collect(std::vector<const Parameter*>& out) const {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm LayerNorm::create(const std::string& name, std::size_t d) {
  return LayerNorm{Parameter{name + ".gamma", Tensor::full(1, d, 1.0)},
                   Parameter{name + ".beta", Tensor::zeros(1, d)}};
}

Var LayerNorm::operator()(Graph& g, const Var& x) const {
  return layer_norm(x, g.param(gamma), g.param(beta));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

void LayerNorm::collect(std::vector<const Parameter*>& out) const {
  out.push_back(&gamma);
  out.push_back(&beta);
}

AttentionWeights AttentionWeights::create(const std::string& name,
                                          std::size_t d, std::mt19937_64& rng,
                                          bool zero_output) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionWeights w;
  w.wq = Parameter{name + ".wq", Tensor::randn(d, d, s, rng)};
  w.wk = Parameter{name + ".wk", Tensor::randn(d, d, s, rng)};
  w.wv = Parameter{name + ".wv", Tensor::randn(d, d, s, rng)};
  w.wo = Parameter{name + ".wo",
                   zero_output ? Tensor::zeros(d, d) : Tensor::randn(d, d, s, rng)};
  return w;
}

void AttentionWeights::collect(std::vector<Parameter*>& out) {
  out.insert(out.end(), {&wq, &wk, &wv, &wo});
}

void AttentionWeights::collect(std::vector<const Parameter*>& out) const {
  out.insert(out.end(), {&wq, &wk, &wv, &wo});
}

Var multi_head_attention(Graph& g, const AttentionWeights& w,
                         const Var& query_input, const Var& kv_input,
                         std::size_t n_heads, const AttentionOptions& opts) {
  const std::size_t d = w.wq.value.rows();
  if (query_input.cols() != d || kv_input.cols() != d) {
    throw ShapeError("attention: inputs of width " +
                     std::to_string(query_input.cols()) + "/" +
                     std::to_string(kv_input.cols()) + " for model width " +
                     std::to_string(d));
  }
  if (n_heads == 0 || d % n_heads != 0) {
    throw ShapeError("attention: width " + std::to_string(d) +
                     " not divisible by " + std::to_string(n_heads) + " heads");
  }
  const std::size_t d_head = d / n_heads;
  Var q = matmul(query_input, g.param(w.wq));
  Var k = matmul(kv_input, g.param(w.wk));
  Var v = matmul(kv_input, g.param(w.wv));

  std::size_t n_prefix = 0;
  if (opts.prefix_keys != nullptr) {
    if (opts.prefix_values == nullptr ||
        opts.prefix_keys->cols() != d || opts.prefix_values->cols() != d ||
        opts.prefix_keys->rows() != opts.prefix_values->rows()) {
      throw ShapeError("attention: prefix keys/values must both be L x " +
                       std::to_string(d));
    }
    n_prefix = opts.prefix_keys->rows();
    k = concat({*opts.prefix_keys, k}, 0);
    v = concat({*opts.prefix_values, v}, 0);
  }

  const std::size_t lq = query_input.rows();
  const std::size_t lk = k.rows();
  std::optional<Var> mask;
  if (opts.causal) {
    if (lq != kv_input.rows()) {
      throw ShapeError("attention: causal mask needs self-attention shapes");
    }
    Tensor m({lq, lk});
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lq; ++i) {
      for (std::size_t j = n_prefix + i + 1; j < lk; ++j) m(i, j) = neg_inf;
    }
    mask = g.constant(std::move(m));
  }
  if (opts.logit_gate != nullptr) {
    const Shape want{n_heads, lq, lk};
    if (opts.logit_gate->shape() != want) {
      throw ShapeError("attention: gate shape " +
                       shape_to_string(opts.logit_gate->shape()) +
                       ", expected " + shape_to_string(want));
    }
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t c0 = h * d_head;
    const std::size_t c1 = c0 + d_head;
    Var qh = n_heads == 1 ? q : slice_cols(q, c0, c1);
    Var kh = n_heads == 1 ? k : slice_cols(k, c0, c1);
    Var vh = n_heads == 1 ? v : slice_cols(v, c0, c1);
    Var sim = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (opts.logit_gate != nullptr) {
      sim = mul(sim, g.constant(opts.logit_gate->slab(h)));
    }
    if (mask) sim = add(sim, *mask);
    Var attn = softmax(sim);
    if (opts.trace != nullptr) opts.trace->push_back(attn.value());
    heads.push_back(matmul(attn, vh));
  }
  Var merged = n_heads == 1 ? heads.front() : concat(heads, 1);
  return matmul(merged, g.param(w.wo));
}

FeedForward FeedForward::create(const std::string& name, std::size_t d,
                                std::size_t d_ff, std::mt19937_64& rng) {
  return FeedForward{
      Linear::create(name + ".up", d, d_ff, rng,
                     1.0 / std::sqrt(static_cast<double>(d))),
      Linear::create(name + ".down", d_ff, d, rng,
                     1.0 / std::sqrt(static_cast<double>(d_ff)))};
}

Var FeedForward::operator()(Graph& g, const Var& x) const {
  return down(g, relu(up(g, x)));
}

void FeedForward::collect(std::vector<Parameter*>& out) {
  up.collect(out);
  down.collect(out);
}

void FeedForward::collect(std::vector<const Parameter*>& out) const {
  up.collect(out);
  down.collect(out);
}

Tensor sinusoidal_positions(std::size_t rows, std::size_t d,
                            std::size_t offset) {
  Tensor t({rows, d});
  for (std::size_t r = 0; r < rows; ++r) {
    const double pos = static_cast<double>(r + offset);
    for (std::size_t c = 0; c < d; c += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(c) / static_cast<double>(d));
      t(r, c) = std::sin(pos * freq);
      if (c + 1 < d) t(r, c + 1) = std::cos(pos * freq);
    }
  }
  return t;
}

}  // namespace racc::nn
