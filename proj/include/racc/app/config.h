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
#include <filesystem>
#include <string>

#include "json.hpp"

#include "racc/app/pretrain.h"
#include "racc/modulator/racc.h"
#include "racc/modulator/trainer.h"
#include "racc/retrieval/task.h"
#include "racc/tinylm/model.h"

namespace racc::app {

enum class Variant { kHomo, kHetero };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& text);

/// Every knob of a run. JSON files may set any subset of fields; unknown
/// keys are rejected.
struct RunConfig {
  retrieval::TaskConfig task;
  /// Architecture of the hyper model (and of the base in the homo variant).
  /// vocab_size and patch_width are filled in from the task.
  tinylm::ModelConfig hyper_model;
  /// Base model of the hetero variant.
  tinylm::ModelConfig hetero_base;
  std::uint64_t model_seed = 1;
  PretrainConfig pretrain;
  modulator::RaccConfig racc;
  modulator::TrainConfig train;
  Variant variant = Variant::kHomo;
  std::filesystem::path out = "runs/default";
  std::size_t max_answer_len = 4;
  /// Val instances timed by `bench`; at least 100.
  std::size_t bench_instances = 150;

  RunConfig();

  /// Sets the task, RACC and training seeds together.
  void set_seed(std::uint64_t seed);
  /// Model configs with vocabulary and patch sizes resolved.
  tinylm::ModelConfig resolved_hyper(std::size_t vocab_size) const;
  tinylm::ModelConfig resolved_base(std::size_t vocab_size) const;
  void validate() const;

  nlohmann::json to_json() const;
  /// Applies the fields present in `j` on top of the current values.
  void merge_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace racc::app
