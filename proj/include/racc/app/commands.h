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

// The five pipeline subcommands plus the ablation grid. Each reads the
// artifacts of its predecessors from the run directory and fails with
// MissingArtifactError when one is absent.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "racc/app/config.h"
#include "racc/app/metrics.h"

namespace racc::app {

class MissingArtifactError : public std::runtime_error {
 public:
  MissingArtifactError(const std::filesystem::path& path,
                       const std::string& producer);
};

/// File layout of a run directory.
struct RunPaths {
  explicit RunPaths(const std::filesystem::path& out);

  std::filesystem::path dir;
  std::filesystem::path run_config;
  std::filesystem::path corpus;
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path hyper;
  std::filesystem::path base;  // hetero variant only
  std::filesystem::path pretrain_log;
  std::filesystem::path racc;
  std::filesystem::path train_log;
  std::filesystem::path cache;
  std::filesystem::path metrics_json;
  std::filesystem::path metrics_txt;
  std::filesystem::path bench_json;
  std::filesystem::path ablation_json;
  std::filesystem::path ablation_txt;
};

void cmd_gen(const RunConfig& config, std::ostream& log);
void cmd_pretrain(const RunConfig& config, std::ostream& log);
/// With `pre_save`, also writes the compressed-prompt cache.
void cmd_train(const RunConfig& config, bool pre_save, std::ostream& log);
MetricsReport cmd_eval(const RunConfig& config, std::ostream& log);
LatencyReport cmd_bench(const RunConfig& config, std::ostream& log);

struct AblationRow {
  modulator::Toggles toggles;
  double vqa_accuracy = 0.0;
  double final_loss = 0.0;  // mean over the last 100 steps
};

/// Trains and evaluates every on/off combination of `vary` (names from
/// pipe, dcse, rgca, prdb); the other toggles keep their configured values.
std::vector<AblationRow> cmd_ablate(const RunConfig& config,
                                    const std::vector<std::string>& vary,
                                    std::ostream& log);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace racc::app
