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


// Command-line driver: gen, pretrain, train, eval, bench, ablate and all.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "racc/app/commands.h"
#include "racc/app/config.h"

namespace {

namespace fs = std::filesystem;
using racc::app::RunConfig;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool no_pipe = false;
  bool no_prdb = false;
  bool no_dcse = false;
  bool no_rgca = false;
  std::optional<std::size_t> k;
  std::string variant;
  bool pre_save = false;
  std::vector<std::string> vary{"pipe", "dcse", "rgca", "prdb"};
};

// Explicit --config, else the run directory's recorded config, else
// defaults; flags are applied last.
RunConfig resolve(const Options& opt) {
  RunConfig config;
  const fs::path out = opt.out.empty() ? config.out : fs::path(opt.out);
  if (!opt.config_path.empty()) {
    config = RunConfig::load(opt.config_path);
  } else if (fs::exists(racc::app::RunPaths(out).run_config)) {
    config = RunConfig::load(racc::app::RunPaths(out).run_config);
  }
  if (!opt.out.empty()) config.out = opt.out;
  if (opt.seed) config.set_seed(*opt.seed);
  if (opt.no_pipe) config.racc.toggles.pipe = false;
  if (opt.no_prdb) config.racc.toggles.prdb = false;
  if (opt.no_dcse) config.racc.toggles.dcse = false;
  if (opt.no_rgca) config.racc.toggles.rgca = false;
  if (opt.k) config.train.k = *opt.k;
  if (!opt.variant.empty()) config.variant = racc::app::parse_variant(opt.variant);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RACC: retrieval-augmented compressed-prompt modulation on a toy KB-VQA task"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "Seed for task generation, initialization and batching");
  app.add_option("--out", opt.out, "Run directory (default runs/default)");
  app.add_flag("--no-pipe", opt.no_pipe, "Random prompt initialization instead of hard prompts");
  app.add_flag("--no-prdb", opt.no_prdb, "Disable the pseudo-relevance gradient gate");
  app.add_flag("--no-dcse", opt.no_dcse, "Disable decoupled cross-source enhancement");
  app.add_flag("--no-rgca", opt.no_rgca, "Disable retrieval-score gating in aggregation");
  app.add_option("--k", opt.k, "Retrieved documents per question")->check(CLI::PositiveNumber);
  app.add_option("--variant", opt.variant, "homo or hetero base model")
      ->check(CLI::IsMember({"homo", "hetero"}));

  auto* gen = app.add_subcommand("gen", "Generate corpus and train/val instances");
  auto* pre = app.add_subcommand("pretrain", "Stage-0 pretraining of the frozen models");
  auto* train = app.add_subcommand("train", "Train prompts, aggregation and MLPs");
  train->add_flag("--pre-save", opt.pre_save, "Write the compressed-prompt cache");
  auto* eval = app.add_subcommand("eval", "Evaluate on the val split");
  auto* bench = app.add_subcommand("bench", "Latency with and without pre-saved prompts");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate a toggle grid");
  ablate->add_option("--vary", opt.vary, "Toggles to vary (pipe dcse rgca prdb)")
      ->check(CLI::IsMember({"pipe", "dcse", "rgca", "prdb"}));
  auto* all = app.add_subcommand("all", "gen, pretrain, train --pre-save, eval, bench");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = resolve(opt);
    std::ostream& log = std::cout;
    if (gen->parsed()) racc::app::cmd_gen(config, log);
    if (pre->parsed()) racc::app::cmd_pretrain(config, log);
    if (train->parsed()) racc::app::cmd_train(config, opt.pre_save, log);
    if (eval->parsed()) racc::app::cmd_eval(config, log);
    if (bench->parsed()) racc::app::cmd_bench(config, log);
    if (ablate->parsed()) racc::app::cmd_ablate(config, opt.vary, log);
    if (all->parsed()) {
      racc::app::cmd_gen(config, log);
      racc::app::cmd_pretrain(config, log);
      racc::app::cmd_train(config, true, log);
      racc::app::cmd_eval(config, log);
      racc::app::cmd_bench(config, log);
    }
  } catch (const std::exception& e) {
    std::cerr << "racc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
