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


#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "racc/app/commands.h"
#include "racc/app/config.h"
#include "racc/app/metrics.h"

using namespace racc;
using namespace racc::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandResult {
  int status = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(RACC_CLI) + " " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) r.output += buf;
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

/// Smallest config that still has 100+ val instances for `bench`.
json tiny_config_json(const fs::path& out) {
  return {
      {"out", out.string()},
      {"bench_instances", 100},
      {"task", {{"n_entities", 40}, {"n_attributes", 4}, {"n_instances", 160},
                {"val_fraction", 0.65}, {"filler_sentences", 1}}},
      {"hyper_model", {{"d_model", 16}, {"n_heads", 2}, {"n_enc_layers", 1},
                       {"n_dec_layers", 1}, {"d_ff", 32}}},
      {"pretrain", {{"steps", 20}, {"batch_size", 4}, {"warmup_steps", 2}}},
      {"racc", {{"n_heads", 2}}},
      {"train", {{"batch_size", 2}, {"warmup_steps", 2}, {"total_steps", 20}}},
  };
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() /
             ("racc_cli_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny_config(const fs::path& out) {
  RunConfig c;
  c.merge_json(tiny_config_json(out));
  c.validate();
  return c;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("vqa accuracy examples") {
  const std::vector<std::string> five(5, "red");
  CHECK(vqa_accuracy("red", five) == 1.0);
  CHECK(vqa_accuracy("red", {"red", "red", "blue", "blue", "blue"}) == doctest::Approx(2.0 / 3.0));
  CHECK(vqa_accuracy("red", {"red", "blue"}) == doctest::Approx(1.0 / 3.0));
  CHECK(vqa_accuracy("green", five) == 0.0);
  CHECK_THROWS_AS(vqa_accuracy("red", {}), std::invalid_argument);
}

TEST_CASE("loss sampling takes window means") {
  const std::vector<double> losses{1, 2, 3, 4, 5};
  const auto s = sample_losses(losses, 2);
  REQUIRE(s.size() == 3);
  CHECK(s[0].step == 2);
  CHECK(s[0].loss == 1.5);
  CHECK(s[1].loss == 3.5);
  CHECK(s[2].step == 5);
  CHECK(s[2].loss == 5.0);
}

TEST_CASE("latency saving") {
  LatencyReport r;
  r.without_cache_s = 2.0;
  r.with_cache_s = 0.5;
  CHECK(r.saving() == 0.75);
}

TEST_CASE("config round trips through JSON and rejects unknown keys") {
  TempDir dir("config");
  RunConfig a = tiny_config(dir.path / "run");
  a.variant = Variant::kHetero;
  a.racc.toggles.dcse = false;
  a.set_seed(42);
  a.save(dir.path / "c.json");
  const RunConfig b = RunConfig::load(dir.path / "c.json");
  CHECK(b.to_json() == a.to_json());
  CHECK(b.task.seed == 42);
  CHECK(b.train.seed == 42);

  RunConfig c;
  CHECK_THROWS_WITH_AS(c.merge_json(json{{"task", {{"n_entitys", 3}}}}),
                       doctest::Contains("task.n_entitys"), std::invalid_argument);
  CHECK_THROWS_AS(c.merge_json(json{{"bogus", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(c.merge_json(json{{"variant", "both"}}), std::invalid_argument);
  RunConfig d;
  d.bench_instances = 50;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("commands name the step that produces a missing artifact") {
  TempDir dir("missing");
  const RunConfig c = tiny_config(dir.path);
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(cmd_pretrain(c, log), doctest::Contains("run `racc gen` first"),
                       MissingArtifactError);
  cmd_gen(c, log);
  CHECK_THROWS_WITH_AS(cmd_train(c, false, log), doctest::Contains("racc pretrain"),
                       MissingArtifactError);
  CHECK_THROWS_WITH_AS(cmd_eval(c, log), doctest::Contains("racc pretrain"),
                       MissingArtifactError);

  const auto r = run_cli("--out " + (dir.path / "empty").string() + " pretrain");
  CHECK(r.status == 1);
  CHECK(r.output.find("racc gen") != std::string::npos);
}

TEST_CASE("full pipeline through the executable") {
  TempDir dir("pipeline");
  const fs::path out = dir.path / "run";
  {
    std::ofstream os(dir.path / "tiny.json");
    os << tiny_config_json(out).dump(2);
  }
  const std::string cfg = "--config " + (dir.path / "tiny.json").string();
  auto r = run_cli(cfg + " gen");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  r = run_cli("--out " + out.string() + " pretrain");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  r = run_cli("--out " + out.string() + " train");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  r = run_cli("--out " + out.string() + " bench");
  CHECK(r.status == 1);
  CHECK(r.output.find("--pre-save") != std::string::npos);
  r = run_cli("--out " + out.string() + " train --pre-save");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  r = run_cli("--out " + out.string() + " eval");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  r = run_cli("--out " + out.string() + " bench");
  REQUIRE_MESSAGE(r.status == 0, r.output);

  const RunPaths paths(out);
  for (const auto& p : {paths.corpus, paths.train, paths.val, paths.hyper, paths.racc,
                        paths.cache, paths.metrics_json, paths.metrics_txt, paths.bench_json}) {
    CHECK_MESSAGE(fs::exists(p), p.string());
  }
  std::ifstream mj(paths.metrics_json);
  const json metrics = json::parse(mj);
  CHECK(metrics.at("val_instances") == 104);
  CHECK(metrics.at("vqa_accuracy").get<double>() >= 0.0);
  CHECK(metrics.at("vqa_accuracy").get<double>() <= 1.0);
  CHECK(metrics.at("prrecall").contains("at_5"));
  CHECK(metrics.contains("disk"));
  std::ifstream bj(paths.bench_json);
  const json bench = json::parse(bj);
  CHECK(bench.at("instances") == 100);
  CHECK(bench.at("answers_identical") == true);

  // Evaluation is a pure function of the artifacts.
  std::ostringstream log;
  const RunConfig config = RunConfig::load(paths.run_config);
  CHECK(cmd_eval(config, log).to_json(false) == cmd_eval(config, log).to_json(false));

  r = run_cli("--out " + out.string() + " --variant triple eval");
  CHECK(r.status != 0);
}

TEST_CASE("ablating two toggles gives four rows") {
  TempDir dir("ablate");
  RunConfig c = tiny_config(dir.path);
  std::ostringstream log;
  cmd_gen(c, log);
  cmd_pretrain(c, log);
  const auto rows = cmd_ablate(c, {"dcse", "rgca"}, log);
  REQUIRE(rows.size() == 4);
  CHECK(rows.front().toggles.dcse);
  CHECK(rows.front().toggles.rgca);
  CHECK_FALSE(rows.back().toggles.dcse);
  CHECK_FALSE(rows.back().toggles.rgca);
  for (const auto& row : rows) {
    CHECK(row.toggles.pipe);
    CHECK(row.toggles.prdb);
    CHECK(std::isfinite(row.final_loss));
  }
  const std::string table = ablation_table(rows);
  CHECK(std::count(table.begin(), table.end(), '\n') == 5);
  CHECK(table.find("  x     -     -     x") != std::string::npos);
  CHECK(fs::exists(RunPaths(dir.path).ablation_json));
  CHECK_THROWS(cmd_ablate(c, {"warp"}, log));
}

}  // TEST_SUITE
