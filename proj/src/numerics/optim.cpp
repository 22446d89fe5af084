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

#include "racc/numerics/optim.h"

#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace racc {

void ScheduleState::validate() const {
  if (step < 0) throw std::invalid_argument("schedule step must be >= 0");
  if (!(0 < warmup_steps && warmup_steps < total_steps)) {
    throw std::invalid_argument("schedule requires 0 < warmup_steps < total_steps");
  }
  if (!(lr_floor < lr_peak)) {
    throw std::invalid_argument("schedule requires lr_floor < lr_peak");
  }
}

double learning_rate(const ScheduleState& state) {
  state.validate();
  if (state.step > state.total_steps) {
    std::cerr << "warning: schedule step " << state.step
              << " exceeds total_steps " << state.total_steps
              << "; learning rate clamped to 0\n";
    return 0.0;
  }
  if (state.step <= state.warmup_steps) {
    const double t = static_cast<double>(state.step) /
                     static_cast<double>(state.warmup_steps);
    return state.lr_floor + (state.lr_peak - state.lr_floor) * t;
  }
  const double progress =
      static_cast<double>(state.step - state.warmup_steps) /
      static_cast<double>(state.total_steps - state.warmup_steps);
  return 0.5 * state.lr_peak * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(std::span<Parameter* const> params,
                std::span<const Tensor> grads,
                std::span<AdamMoments> moments, const ScheduleState& state,
                const AdamWConfig& config) {
  if (params.size() != grads.size() || params.size() != moments.size()) {
    throw std::invalid_argument("adamw_step: params/grads/moments count differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& shape = params[i]->value.shape();
    if (grads[i].shape() != shape) {
      throw ShapeError("adamw_step: gradient for '" + params[i]->name +
                       "' has shape " + shape_to_string(grads[i].shape()) +
                       ", parameter is " + shape_to_string(shape));
    }
    if (!grads[i].all_finite()) {
      throw std::domain_error("adamw_step: non-finite gradient for parameter '" +
                              params[i]->name + "'");
    }
  }

  const double lr = learning_rate(state);
  for (std::size_t i = 0; i < params.size(); ++i) {
    AdamMoments& mom = moments[i];
    const Shape& shape = params[i]->value.shape();
    if (mom.first.shape() != shape || mom.second.shape() != shape) {
      mom = AdamMoments{Tensor(shape), Tensor(shape), 0};
    }
    const double t = static_cast<double>(++mom.updates);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);

    auto w = params[i]->value.mutable_data();
    auto g = grads[i].data();
    auto m = mom.first.mutable_data();
    auto v = mom.second.mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= lr * (m_hat / (std::sqrt(v_hat) + config.eps) +
                    config.weight_decay * w[j]);
    }
  }
}

AdamW::AdamW(std::vector<Parameter*> params, ScheduleState schedule,
             AdamWConfig config)
    : params_(std::move(params)),
      moments_(params_.size()),
      schedule_(schedule),
      config_(config) {
  schedule_.validate();
}

double AdamW::step(const Gradients& grads) {
  std::vector<Tensor> g;
  g.reserve(params_.size());
  for (const Parameter* p : params_) g.push_back(grads.of(*p));
  return step(g);
}

double AdamW::step(std::span<const Tensor> grads) {
  const double lr = learning_rate(schedule_);
  adamw_step(params_, grads, moments_, schedule_, config_);
  ++schedule_.step;
  return lr;
}

}  // namespace racc
