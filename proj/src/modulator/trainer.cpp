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

#include "racc/modulator/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace racc::modulator {

void TrainConfig::validate() const {
  if (k == 0) throw std::invalid_argument("K must be at least 1");
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  schedule.validate();
}

Trainer::Trainer(RaccModel& model,
                 const std::vector<retrieval::Document>& corpus,
                 std::vector<TrainExample> examples, const TrainConfig& config)
    : model_(&model),
      corpus_(&corpus),
      examples_(std::move(examples)),
      config_(config),
      optimizer_(model.parameters(), config.schedule, config.adamw),
      rng_(config.seed) {
  config_.validate();
  if (examples_.empty()) throw std::invalid_argument("no training examples");
  for (const TrainExample& ex : examples_) {
    if (ex.answer.empty()) {
      throw std::invalid_argument("example " + ex.instance->id + " has no answer tokens");
    }
    if (ex.retrieved.size() != config_.k) {
      throw std::invalid_argument("example " + ex.instance->id + " has " +
                                  std::to_string(ex.retrieved.size()) +
                                  " documents, K = " + std::to_string(config_.k));
    }
  }
  order_.resize(examples_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
}

Trainer::BatchResult Trainer::evaluate_batch(
    std::span<const TrainExample* const> batch) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Graph g;
  std::vector<Var> losses;
  for (const TrainExample* ex : batch) {
    RaccQuery q = make_query(*ex->instance, ex->retrieved, *corpus_);
    const auto [inputs, targets] = teacher_forcing(ex->answer);
    Var logits = racc_logits(g, *model_, q, inputs, /*training=*/true);
    losses.push_back(lm_loss(logits, targets));
  }
  Var total = losses.size() == 1 ? losses.front() : sum(concat(losses, 0));
  Var loss = scale(total, 1.0 / static_cast<double>(batch.size()));
  BatchResult r;
  r.loss = loss.value().item();
  if (!std::isfinite(r.loss)) {
    std::ostringstream msg;
    msg << "non-finite training loss at step " << optimizer_.schedule().step
        << " (instances:";
    for (const TrainExample* ex : batch) msg << ' ' << ex->instance->id;
    msg << ")";
    throw std::runtime_error(msg.str());
  }
  Gradients grads = g.backward(loss);
  for (Parameter* p : model_->parameters()) r.grads.push_back(grads.of(*p));
  return r;
}

double Trainer::train_step(std::span<const TrainExample* const> batch) {
  BatchResult r = evaluate_batch(batch);
  optimizer_.step(r.grads);
  losses_.push_back(r.loss);
  return r.loss;
}

double Trainer::step() {
  std::vector<const TrainExample*> batch;
  while (batch.size() < config_.batch_size) {
    if (cursor_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    batch.push_back(&examples_[order_[cursor_++]]);
  }
  return train_step(batch);
}

void Trainer::run(const std::function<void(std::int64_t, double)>& on_step) {
  while (optimizer_.schedule().step < optimizer_.schedule().total_steps) {
    const std::int64_t s = optimizer_.schedule().step;
    const double loss = step();
    if (on_step) on_step(s, loss);
  }
}

}  // namespace racc::modulator
