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

#include "racc/app/pretrain.h"

#include <random>
#include <stdexcept>

#include "racc/modulator/modulation.h"
#include "racc/numerics/optim.h"

namespace racc::app {

namespace {

Var example_loss(Graph& g, const tinylm::TinyLM& model,
                 const retrieval::PretrainExample& ex, double lm_weight) {
  const auto [inputs, targets] = modulator::teacher_forcing(ex.answer);
  Var context = ex.kind == retrieval::PretrainKind::kSummary
                    ? model.embed_tokens(g, ex.document)
                    : tinylm::build_context(g, model, ex.image, ex.question,
                                            ex.document);
  if (model.is_encoder_decoder() || ex.document.size() < 2 || lm_weight == 0.0 ||
      ex.kind == retrieval::PretrainKind::kSummary) {
    Var logits = tinylm::base_forward(g, model, context, inputs);
    return modulator::lm_loss(logits, targets);
  }
  // Decoder-only: one causal pass scores the answer and the document text.
  Var seq = concat({context, model.embed_tokens(g, inputs)}, 0);
  Var logits = model.logits(g, model.decode_only(g, seq));
  const std::size_t n_ctx = context.rows();
  const std::size_t n_doc = ex.document.size();
  std::vector<int> qa(seq.rows(), -1);
  std::vector<int> lm(seq.rows(), -1);
  for (std::size_t i = 0; i < targets.size(); ++i) qa[n_ctx + i] = targets[i];
  for (std::size_t i = 0; i + 1 < n_doc; ++i) lm[i] = ex.document[i + 1];
  return add(cross_entropy(logits, qa), scale(cross_entropy(logits, lm), lm_weight));
}

}  // namespace

std::vector<double> pretrain(
    tinylm::TinyLM& model, const retrieval::World& world,
    const PretrainConfig& config,
    const std::function<void(std::int64_t, double)>& on_step) {
  if (config.steps <= 0 || config.batch_size == 0) {
    throw std::invalid_argument("pretrain: steps and batch size must be positive");
  }
  model.set_trainable(true);
  ScheduleState schedule;
  schedule.warmup_steps = config.warmup_steps;
  schedule.total_steps = config.steps;
  schedule.lr_peak = config.lr_peak;
  schedule.lr_floor = config.lr_floor;
  AdamWConfig adam;
  adam.weight_decay = 0.0;
  AdamW opt(model.parameters(), schedule, adam);
  std::mt19937_64 rng(config.seed);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(config.steps));
  for (std::int64_t step = 0; step < config.steps; ++step) {
    Graph g;
    std::vector<Var> parts;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      parts.push_back(example_loss(g, model, world.sample_pretrain(rng),
                                   config.lm_weight));
    }
    Var loss = scale(sum(concat(parts, 0)),
                     1.0 / static_cast<double>(config.batch_size));
    losses.push_back(loss.value().item());
    opt.step(g.backward(loss));
    if (on_step) on_step(step, losses.back());
  }
  model.set_trainable(false);
  return losses;
}

double in_context_accuracy(const tinylm::TinyLM& model,
                           const retrieval::World& world, std::size_t n,
                           std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("in_context_accuracy: n must be positive");
  std::mt19937_64 rng(seed);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const retrieval::PretrainExample ex =
        world.sample_pretrain(rng, /*allow_summary=*/false);
    Graph g;
    Var context = tinylm::build_context(g, model, ex.image, ex.question, ex.document);
    if (tinylm::generate(g, model, context, nullptr, ex.answer.size() + 1) ==
        ex.answer) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace racc::app
