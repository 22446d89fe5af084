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

// Stage-0: the toy hyper and base models are trained once on in-context QA
// over independently re-sampled worlds, then frozen.

#include <cstdint>
#include <functional>
#include <vector>

#include "racc/retrieval/task.h"
#include "racc/tinylm/model.h"

namespace racc::app {

struct PretrainConfig {
  std::int64_t steps = 2000;
  std::size_t batch_size = 8;
  std::int64_t warmup_steps = 200;
  double lr_peak = 2e-3;
  double lr_floor = 1e-5;
  /// Weight of the next-token loss over document text (decoder-only only).
  double lm_weight = 0.5;
  std::uint64_t seed = 11;
};

/// Trains every parameter of `model` and returns the per-step losses.
std::vector<double> pretrain(
    tinylm::TinyLM& model, const retrieval::World& world,
    const PretrainConfig& config,
    const std::function<void(std::int64_t, double)>& on_step = {});

/// Exact-match rate of greedy answers on fresh in-context examples.
double in_context_accuracy(const tinylm::TinyLM& model,
                           const retrieval::World& world, std::size_t n,
                           std::uint64_t seed);

}  // namespace racc::app
