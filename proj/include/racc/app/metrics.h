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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "racc/cachestore/cache.h"

namespace racc::app {

/// min(#annotations equal to `prediction` / 3, 1). Throws on an empty
/// annotation list.
double vqa_accuracy(const std::string& prediction,
                    const std::vector<std::string>& answers);

/// Mean per-instance latency of the two compression paths, in seconds.
struct LatencyReport {
  std::size_t instances = 0;
  double without_cache_s = 0.0;
  double with_cache_s = 0.0;
  bool answers_identical = true;

  /// 1 - with / without.
  double saving() const;
  nlohmann::json to_json() const;
};

struct LossSample {
  std::int64_t step = 0;  // last step of the window, one-based
  double loss = 0.0;      // window mean
};

/// Window means of a loss trajectory, one sample per `every` steps plus a
/// trailing partial window.
std::vector<LossSample> sample_losses(std::span<const double> losses,
                                      std::size_t every);

struct MetricsReport {
  std::string variant;
  std::string toggles;
  std::size_t val_instances = 0;
  double vqa_accuracy = 0.0;
  double baseline_accuracy = 0.0;  // frozen base model without a prefix
  double prrecall_at_1 = 0.0;
  double prrecall_at_3 = 0.0;
  double prrecall_at_5 = 0.0;
  std::optional<cachestore::DiskReport> disk;
  std::vector<LossSample> loss_curve;
  /// Wall-clock fields; excluded from reproducibility comparisons.
  std::optional<LatencyReport> latency;

  nlohmann::json to_json(bool include_timing = true) const;
  std::string to_text() const;
};

}  // namespace racc::app
