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

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "racc/modulator/racc.h"
#include "racc/numerics/optim.h"

namespace racc::modulator {

struct TrainConfig {
  std::size_t k = 5;
  std::size_t batch_size = 4;
  ScheduleState schedule{.lr_peak = 2e-3};
  AdamWConfig adamw;
  std::uint64_t seed = 7;

  void validate() const;
};

/// A training instance with its (frozen) retrieval result.
struct TrainExample {
  const retrieval::VQAInstance* instance = nullptr;
  retrieval::RetrievedSet retrieved;
  std::vector<int> answer;  // gold answer token ids
};

/// Single-writer AdamW loop over {theta_d, theta_vq, h}. Batches are drawn
/// from a reshuffled pass over the examples.
class Trainer {
 public:
  Trainer(RaccModel& model, const std::vector<retrieval::Document>& corpus,
          std::vector<TrainExample> examples, const TrainConfig& config);

  /// Loss and parameter gradients of one batch, without an update.
  struct BatchResult {
    double loss = 0.0;
    std::vector<Tensor> grads;  // aligned with model.parameters()
  };
  BatchResult evaluate_batch(std::span<const TrainExample* const> batch) const;

  /// One optimizer step on `batch`. Returns the batch loss.
  double train_step(std::span<const TrainExample* const> batch);
  /// One optimizer step on the next sampled batch.
  double step();
  /// Runs until the schedule is exhausted; `on_step(step, loss)` optional.
  void run(const std::function<void(std::int64_t, double)>& on_step = {});

  const std::vector<double>& losses() const { return losses_; }
  std::int64_t steps_done() const { return optimizer_.schedule().step; }

 private:
  RaccModel* model_;
  const std::vector<retrieval::Document>* corpus_;
  std::vector<TrainExample> examples_;
  TrainConfig config_;
  AdamW optimizer_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::vector<double> losses_;
};

}  // namespace racc::modulator
