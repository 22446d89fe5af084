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
#include <span>
#include <vector>

#include "racc/numerics/graph.h"
#include "racc/numerics/tensor.h"

namespace racc {

/// Linear warmup from lr_floor to lr_peak, then cosine decay to zero.
struct ScheduleState {
  std::int64_t step = 0;
  std::int64_t warmup_steps = 100;
  std::int64_t total_steps = 2000;
  double lr_floor = 1e-5;
  double lr_peak = 1e-4;

  void validate() const;
};

/// Steps past total_steps clamp to 0 and log a warning to stderr.
double learning_rate(const ScheduleState& state);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamMoments {
  Tensor first;
  Tensor second;
  std::int64_t updates = 0;  // bias-correction count
};

/// One decoupled-weight-decay Adam update at learning_rate(state).
/// Bias correction uses each moment's own update count. Throws std::domain_error naming the parameter if a gradient is
/// not finite; nothing is modified in that case.
void adamw_step(std::span<Parameter* const> params,
                std::span<const Tensor> grads,
                std::span<AdamMoments> moments, const ScheduleState& state,
                const AdamWConfig& config = {});

/// Owns moments and the schedule for a fixed parameter list.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, ScheduleState schedule,
        AdamWConfig config = {});

  /// Applies one update and advances the schedule. Returns the rate used.
  double step(const Gradients& grads);
  /// Same, with gradients already aligned with params().
  double step(std::span<const Tensor> grads);

  const ScheduleState& schedule() const { return schedule_; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamMoments> moments_;
  ScheduleState schedule_;
  AdamWConfig config_;
};

}  // namespace racc
