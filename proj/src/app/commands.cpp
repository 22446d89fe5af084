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


#include "racc/app/commands.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>

#include "racc/cachestore/cache.h"
#include "racc/modulator/racc.h"
#include "racc/modulator/trainer.h"
#include "racc/retrieval/retriever.h"
#include "racc/tinylm/model.h"

namespace racc::app {

namespace fs = std::filesystem;
using nlohmann::json;
using retrieval::Document;
using retrieval::RetrievedSet;
using retrieval::VQAInstance;
using tinylm::TinyLM;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) throw MissingArtifactError(path, producer);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Generated task files plus the world they were drawn from.
struct TaskData {
  retrieval::World world;
  std::vector<Document> corpus;
  std::vector<VQAInstance> train;
  std::vector<VQAInstance> val;

  TaskData(const RunConfig& config, const RunPaths& paths) : world(config.task) {
    for (const auto& p : {paths.corpus, paths.train, paths.val}) require(p, "racc gen");
    corpus = retrieval::read_corpus(paths.corpus, world.vocab());
    train = retrieval::read_instances(paths.train, world.vocab());
    val = retrieval::read_instances(paths.val, world.vocab());
  }
};

// Frozen Stage-0 models. In the homo variant the base is the hyper model.
struct FrozenModels {
  std::unique_ptr<TinyLM> hyper;
  std::unique_ptr<TinyLM> hetero_base;

  const TinyLM& base() const { return hetero_base ? *hetero_base : *hyper; }
};

std::unique_ptr<TinyLM> load_model(const fs::path& path,
                                   const tinylm::ModelConfig& expected) {
  require(path, "racc pretrain");
  auto model = std::make_unique<TinyLM>(TinyLM::load(path));
  if (!(model->config() == expected)) {
    throw std::runtime_error(path.string() +
                             " was pretrained with a different model config; "
                             "rerun `racc pretrain`");
  }
  model->set_trainable(false);
  return model;
}

FrozenModels load_models(const RunConfig& config, const RunPaths& paths,
                         std::size_t vocab_size) {
  FrozenModels m;
  m.hyper = load_model(paths.hyper, config.resolved_hyper(vocab_size));
  if (config.variant == Variant::kHetero) {
    m.hetero_base = load_model(paths.base, config.resolved_base(vocab_size));
  }
  return m;
}

std::vector<RetrievedSet> retrieve_all(const retrieval::Retriever& retriever,
                                       const std::vector<VQAInstance>& instances,
                                       std::size_t k) {
  std::vector<RetrievedSet> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(retriever.retrieve(inst, k));
  return out;
}

std::vector<double> train_racc(modulator::RaccModel& model, const TaskData& data,
                               const retrieval::Retriever& retriever,
                               const RunConfig& config, std::ostream& log) {
  std::vector<modulator::TrainExample> examples;
  for (const auto& inst : data.train) {
    examples.push_back({&inst, retriever.retrieve(inst, config.train.k),
                        data.world.vocab().tokenize(inst.gold_answer())});
  }
  model.compressor().set_memoize(true);
  modulator::Trainer trainer(model, data.corpus, std::move(examples), config.train);
  const auto t0 = Clock::now();
  const std::int64_t total = config.train.schedule.total_steps;
  double window = 0.0;
  trainer.run([&](std::int64_t step, double loss) {
    window += loss;
    if ((step + 1) % 100 == 0 || step + 1 == total) {
      const auto n = (step + 1) % 100 == 0 ? 100 : (step + 1) % 100;
      log << "  step " << step + 1 << "/" << total << "  loss "
          << fmt("%.4f", window / static_cast<double>(n)) << "  ("
          << fmt("%.1f", seconds_since(t0)) << " s)\n"
          << std::flush;
      window = 0.0;
    }
  });
  model.compressor().set_memoize(false);
  model.compressor().clear_memo();
  return trainer.losses();
}

std::vector<modulator::RaccQuery> make_queries(
    const std::vector<VQAInstance>& instances,
    const std::vector<RetrievedSet>& sets, const std::vector<Document>& corpus,
    std::size_t n) {
  std::vector<modulator::RaccQuery> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(modulator::make_query(instances[i], sets[i], corpus));
  }
  return out;
}

double racc_accuracy(const modulator::RaccModel& model, const TaskData& data,
                     const std::vector<RetrievedSet>& val_sets,
                     std::size_t max_len) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.val.size(); ++i) {
    const auto query = modulator::make_query(data.val[i], val_sets[i], data.corpus);
    const auto answer = modulator::racc_answer(model, query, max_len);
    total += vqa_accuracy(data.world.vocab().detokenize(answer), data.val[i].answers);
  }
  return total / static_cast<double>(data.val.size());
}

// Times racc_answer per query with and without pre-saved prompts.
LatencyReport time_paths(const modulator::RaccModel& model,
                         const std::vector<modulator::RaccQuery>& queries,
                         const cachestore::PromptCache& cache,
                         std::size_t max_len) {
  LatencyReport report;
  report.instances = queries.size();
  if (queries.empty()) return report;
  // One untimed call per path warms allocator and caches.
  modulator::racc_answer(model, queries.front(), max_len);
  modulator::racc_answer(model, queries.front(), max_len, &cache);
  for (const auto& q : queries) {
    auto t0 = Clock::now();
    const auto fresh = modulator::racc_answer(model, q, max_len);
    report.without_cache_s += seconds_since(t0);
    t0 = Clock::now();
    const auto cached = modulator::racc_answer(model, q, max_len, &cache);
    report.with_cache_s += seconds_since(t0);
    report.answers_identical = report.answers_identical && fresh == cached;
  }
  const auto n = static_cast<double>(queries.size());
  report.without_cache_s /= n;
  report.with_cache_s /= n;
  return report;
}

json pretrain_record(const std::vector<double>& losses, double accuracy,
                     double seconds) {
  json curve = json::array();
  for (const auto& s : sample_losses(losses, 100)) {
    curve.push_back({{"step", s.step}, {"loss", s.loss}});
  }
  return {{"loss_curve", curve},
          {"in_context_accuracy", accuracy},
          {"seconds", seconds}};
}

modulator::Toggles set_toggle(modulator::Toggles t, const std::string& name,
                              bool on) {
  if (name == "pipe") t.pipe = on;
  else if (name == "prdb") t.prdb = on;
  else if (name == "dcse") t.dcse = on;
  else if (name == "rgca") t.rgca = on;
  else throw std::invalid_argument("unknown toggle '" + name +
                                   "' (expected pipe, dcse, rgca or prdb)");
  return t;
}

}  // namespace

MissingArtifactError::MissingArtifactError(const fs::path& path,
                                           const std::string& producer)
    : std::runtime_error("missing " + path.string() + "; run `" + producer +
                         "` first") {}

RunPaths::RunPaths(const fs::path& out)
    : dir(out),
      run_config(out / "run_config.json"),
      corpus(out / "corpus.tsv"),
      train(out / "train.tsv"),
      val(out / "val.tsv"),
      hyper(out / "hyper.tlm"),
      base(out / "base.tlm"),
      pretrain_log(out / "pretrain.json"),
      racc(out / "racc.bin"),
      train_log(out / "train.json"),
      cache(out / "prompts.rcc"),
      metrics_json(out / "metrics.json"),
      metrics_txt(out / "metrics.txt"),
      bench_json(out / "bench.json"),
      ablation_json(out / "ablation.json"),
      ablation_txt(out / "ablation.txt") {}

void cmd_gen(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunPaths paths(config.out);
  fs::create_directories(paths.dir);
  const retrieval::World world(config.task);
  const retrieval::Task task = world.generate();
  retrieval::write_corpus(paths.corpus, task.corpus, world.vocab());
  retrieval::write_instances(paths.train, task.train, world.vocab());
  retrieval::write_instances(paths.val, task.val, world.vocab());
  config.save(paths.run_config);
  log << "gen: " << task.corpus.size() << " documents, " << task.train.size()
      << " train / " << task.val.size() << " val instances, vocabulary "
      << world.vocab().size() << " -> " << paths.dir.string() << "\n";
}

void cmd_pretrain(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunPaths paths(config.out);
  require(paths.corpus, "racc gen");
  const retrieval::World world(config.task);
  const std::size_t vocab = world.vocab().size();

  auto run = [&](const tinylm::ModelConfig& mc, std::uint64_t seed,
                 const fs::path& path, const char* name) {
    TinyLM model(mc, seed);
    log << "pretrain " << name << " (" << tinylm::arch_name(mc.arch) << ", d="
        << mc.d_model << ")\n";
    const auto t0 = Clock::now();
    double window = 0.0;
    const auto losses = pretrain(model, world, config.pretrain,
                                 [&](std::int64_t step, double loss) {
      window += loss;
      if ((step + 1) % 100 == 0) {
        log << "  step " << step + 1 << "/" << config.pretrain.steps << "  loss "
            << fmt("%.4f", window / 100.0) << "  ("
            << fmt("%.1f", seconds_since(t0)) << " s)\n"
            << std::flush;
        window = 0.0;
      }
    });
    const double secs = seconds_since(t0);
    const double acc = in_context_accuracy(model, world, 400, config.pretrain.seed + 1);
    log << "  in-context accuracy " << fmt("%.3f", acc) << "\n";
    model.save(path);
    return pretrain_record(losses, acc, secs);
  };

  json record;
  record["hyper"] = run(config.resolved_hyper(vocab), config.model_seed,
                        paths.hyper, "hyper");
  if (config.variant == Variant::kHetero) {
    record["base"] = run(config.resolved_base(vocab), config.model_seed + 1,
                         paths.base, "base");
  }
  write_json(paths.pretrain_log, record);
}

void cmd_train(const RunConfig& config, bool pre_save, std::ostream& log) {
  config.validate();
  const RunPaths paths(config.out);
  const TaskData data(config, paths);
  const FrozenModels models = load_models(config, paths, data.world.vocab().size());
  retrieval::Retriever retriever(data.world);
  retriever.index(data.corpus);

  modulator::RaccModel model(*models.hyper, models.base(), data.world.vocab(),
                             config.racc);
  log << "train " << config.racc.toggles.label() << " (" << variant_name(config.variant)
      << ", K=" << config.train.k << ", batch " << config.train.batch_size << ")\n";
  const auto t0 = Clock::now();
  const auto losses = train_racc(model, data, retriever, config, log);
  const double secs = seconds_since(t0);
  model.save(paths.racc);
  config.save(paths.run_config);
  write_json(paths.train_log, {{"toggles", config.racc.toggles.label()},
                               {"losses", losses},
                               {"seconds", secs}});
  // A cache from earlier parameters would be stale.
  fs::remove(paths.cache);
  if (pre_save) {
    const auto summary = cachestore::build_cache(data.corpus, model.compressor(),
                                                 paths.cache);
    const auto disk = cachestore::disk_report(paths.cache, data.corpus,
                                              data.world.vocab());
    log << "pre-saved " << summary.count << " prompts (" << summary.file_bytes
        << " bytes; raw corpus " << disk.raw_bytes << " bytes, ratio "
        << disk.ratio_text() << ")\n";
  }
}

MetricsReport cmd_eval(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunPaths paths(config.out);
  const TaskData data(config, paths);
  const FrozenModels models = load_models(config, paths, data.world.vocab().size());
  require(paths.racc, "racc train");
  require(paths.train_log, "racc train");
  modulator::RaccModel model(*models.hyper, models.base(), data.world.vocab(),
                             config.racc);
  model.load(paths.racc);
  retrieval::Retriever retriever(data.world);
  retriever.index(data.corpus);

  const std::size_t k = std::max<std::size_t>(config.train.k, 5);
  const auto wide = retrieve_all(retriever, data.val, k);
  const auto sets = retrieve_all(retriever, data.val, config.train.k);

  MetricsReport report;
  report.variant = variant_name(config.variant);
  report.toggles = config.racc.toggles.label();
  report.val_instances = data.val.size();
  report.prrecall_at_1 = retrieval::prrecall_at_k(wide, 1);
  report.prrecall_at_3 = retrieval::prrecall_at_k(wide, 3);
  report.prrecall_at_5 = retrieval::prrecall_at_k(wide, 5);

  const auto& vocab = data.world.vocab();
  double base_total = 0.0;
  for (const auto& inst : data.val) {
    const auto answer = tinylm::generate(models.base(), inst.image, inst.question,
                                         nullptr, config.max_answer_len);
    base_total += vqa_accuracy(vocab.detokenize(answer), inst.answers);
  }
  report.baseline_accuracy = base_total / static_cast<double>(data.val.size());
  report.vqa_accuracy = racc_accuracy(model, data, sets, config.max_answer_len);

  const auto losses = read_json(paths.train_log).at("losses").get<std::vector<double>>();
  report.loss_curve = sample_losses(losses, 100);

  if (fs::exists(paths.cache)) {
    try {
      const auto cache = cachestore::PromptCache::open(paths.cache, *models.hyper,
                                                       model.bank());
      const auto queries = make_queries(data.val, sets, data.corpus, data.val.size());
      report.latency = time_paths(model, queries, cache, config.max_answer_len);
      report.disk = cachestore::disk_report(paths.cache, data.corpus, vocab);
    } catch (const cachestore::StaleCacheError& e) {
      log << "warning: " << e.what() << "\n";
    }
  }
  write_json(paths.metrics_json, report.to_json());
  write_text(paths.metrics_txt, report.to_text());
  log << report.to_text();
  return report;
}

LatencyReport cmd_bench(const RunConfig& config, std::ostream& log) {
  config.validate();
  const RunPaths paths(config.out);
  const TaskData data(config, paths);
  const FrozenModels models = load_models(config, paths, data.world.vocab().size());
  require(paths.racc, "racc train");
  require(paths.cache, "racc train --pre-save");
  modulator::RaccModel model(*models.hyper, models.base(), data.world.vocab(),
                             config.racc);
  model.load(paths.racc);
  const auto cache = cachestore::PromptCache::open(paths.cache, *models.hyper,
                                                   model.bank());
  if (data.val.size() < config.bench_instances) {
    throw std::invalid_argument("bench needs " + std::to_string(config.bench_instances) +
                                " val instances but the split has " +
                                std::to_string(data.val.size()));
  }
  // Retrieval is identical on both paths and stays outside the timed region.
  retrieval::Retriever retriever(data.world);
  retriever.index(data.corpus);
  const auto sets = retrieve_all(retriever, data.val, config.train.k);
  const auto queries = make_queries(data.val, sets, data.corpus, config.bench_instances);
  const LatencyReport report = time_paths(model, queries, cache, config.max_answer_len);
  write_json(paths.bench_json, report.to_json());
  log << "bench over " << report.instances << " val instances\n"
      << "  w/o pre-save  " << fmt("%.3f", 1e3 * report.without_cache_s) << " ms\n"
      << "  w/ pre-save   " << fmt("%.3f", 1e3 * report.with_cache_s) << " ms\n"
      << "  saving        " << fmt("%.1f", 100.0 * report.saving()) << " %\n"
      << "  answers identical: " << (report.answers_identical ? "yes" : "no") << "\n";
  return report;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config,
                                    const std::vector<std::string>& vary,
                                    std::ostream& log) {
  config.validate();
  if (vary.empty()) throw std::invalid_argument("ablate: no toggles to vary");
  for (const auto& name : vary) set_toggle({}, name, true);
  const RunPaths paths(config.out);
  const TaskData data(config, paths);
  const FrozenModels models = load_models(config, paths, data.world.vocab().size());
  retrieval::Retriever retriever(data.world);
  retriever.index(data.corpus);
  const auto val_sets = retrieve_all(retriever, data.val, config.train.k);

  std::vector<AblationRow> rows;
  const std::size_t combos = std::size_t{1} << vary.size();
  for (std::size_t mask = combos; mask-- > 0;) {
    RunConfig run = config;
    for (std::size_t i = 0; i < vary.size(); ++i) {
      run.racc.toggles = set_toggle(run.racc.toggles, vary[i], (mask >> i) & 1);
    }
    modulator::RaccModel model(*models.hyper, models.base(), data.world.vocab(),
                               run.racc);
    log << "ablate " << run.racc.toggles.label() << "\n";
    const auto losses = train_racc(model, data, retriever, run, log);
    AblationRow row;
    row.toggles = run.racc.toggles;
    const std::size_t tail = std::min<std::size_t>(100, losses.size());
    for (std::size_t i = losses.size() - tail; i < losses.size(); ++i) {
      row.final_loss += losses[i] / static_cast<double>(tail);
    }
    row.vqa_accuracy = racc_accuracy(model, data, val_sets, run.max_answer_len);
    log << "  accuracy " << fmt("%.2f", 100.0 * row.vqa_accuracy) << " %\n";
    rows.push_back(row);
  }
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"pipe", r.toggles.pipe},
                 {"dcse", r.toggles.dcse},
                 {"rgca", r.toggles.rgca},
                 {"prdb", r.toggles.prdb},
                 {"vqa_accuracy", r.vqa_accuracy},
                 {"final_loss", r.final_loss}});
  }
  write_json(paths.ablation_json, j);
  write_text(paths.ablation_txt, ablation_table(rows));
  log << ablation_table(rows);
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "PIPE  DCSE  RGCA  PRDB  VQA acc (%)  final loss\n";
  auto mark = [](bool on) { return on ? "  x   " : "  -   "; };
  for (const auto& r : rows) {
    out += mark(r.toggles.pipe);
    out += mark(r.toggles.dcse);
    out += mark(r.toggles.rgca);
    out += mark(r.toggles.prdb);
    out += fmt("%8.2f", 100.0 * r.vqa_accuracy) + "     " +
           fmt("%.4f", r.final_loss) + "\n";
  }
  return out;
}

}  // namespace racc::app
