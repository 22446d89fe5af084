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


// Acceptance run: one PASS/FAIL line per criterion. The pipeline criteria
// share one default-config run directory.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "racc/aggregator/aggregator.h"
#include "racc/app/commands.h"
#include "racc/app/metrics.h"
#include "racc/cachestore/cache.h"
#include "racc/modulator/racc.h"
#include "racc/modulator/trainer.h"
#include "racc/numerics/nn.h"
#include "racc/retrieval/retriever.h"
#include "support/gradcheck.h"
#include "support/micro.h"
#include "support/op_cases.h"

namespace {

namespace fs = std::filesystem;
using namespace racc;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string fix(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& run) {
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << ": "
            << o.detail << std::endl;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient suite.

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& c : testing::op_cases()) {
    const double err = testing::check_leaves(c.loss, c.inputs);
    if (err >= worst_op) {
      worst_op = err;
      worst_name = c.name;
    }
  }
  const double weights = testing::attention_weight_error();
  if (weights >= worst_op) {
    worst_op = weights;
    worst_name = "attention weights";
  }
  // stop_gradient must block exactly.
  Graph g;
  Var x = g.variable(Tensor::full(2, 3, 0.5));
  const Gradients grads = g.backward(sum(mul(stop_gradient(x), x)));
  const bool blocked = grads.of(x) == Tensor::full(2, 3, 0.5);

  const double e2e = testing::end_to_end_gradient_error(2);
  const double secs = seconds_since(t0);
  const bool pass = worst_op < 1e-6 && e2e < 1e-5 && secs < 60.0 && blocked;
  return {pass, "per-op max rel err " + sci(worst_op) + " (" + worst_name +
                    ", < 1e-6); end-to-end " + sci(e2e) +
                    " (< 1e-5); stop_gradient exact " + (blocked ? "yes" : "no") +
                    "; " + fix(secs, 1) + " s (< 60 s)"};
}

// ---------------------------------------------------------------------------
// 2. PRDB exactness.

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad_theta_d;
};

LossAndGrad gated_pipeline(const modulator::RaccModel& model,
                           const modulator::RaccQuery& query,
                           std::span<const int> answer, bool training) {
  Graph g;
  const auto [inputs, targets] = modulator::teacher_forcing(answer);
  Var loss = modulator::lm_loss(modulator::racc_logits(g, model, query, inputs, training),
                                targets);
  const Gradients grads = g.backward(loss);
  return {loss.value().item(), grads.of(model.bank().theta_d)};
}

// The same forward pass with every irrelevant document's prompt computed
// in a separate graph and inserted as a constant, so θ_d is reachable only
// through relevant documents.
LossAndGrad reduced_graph_oracle(const modulator::RaccModel& model,
                                 const modulator::RaccQuery& query,
                                 std::span<const int> answer) {
  Graph g;
  const auto& comp = model.compressor();
  std::vector<Var> docs;
  for (std::size_t i = 0; i < query.docs.size(); ++i) {
    if (query.relevant[i]) {
      docs.push_back(comp.compress_document(g, *query.docs[i]).rows);
    } else {
      Graph scratch;
      docs.push_back(g.constant(comp.compress_document(scratch, *query.docs[i]).rows.value()));
    }
  }
  Var joint = comp.compress_joint(g, *query.image, query.question).rows;
  const std::vector<int> question(query.question.begin(), query.question.end());
  Var theta_v = comp.compress_decoupled(g, query.image, nullptr).rows;
  Var theta_q = comp.compress_decoupled(g, nullptr, &question).rows;
  docs = aggregator::dcse_enhance(g, model.dcse(), docs, theta_v, theta_q);
  Var star = aggregator::rgca_forward(g, model.rgca(), joint, docs, query.scores);
  tinylm::PrefixKV prefix =
      modulator::generate_modulation(g, star, model.mlps(), model.base().config());
  Var context = tinylm::build_context(g, model.base(), *query.image, query.question);
  const auto [inputs, targets] = modulator::teacher_forcing(answer);
  Var logits = tinylm::base_forward(g, model.base(), context, inputs, &prefix);
  Var loss = modulator::lm_loss(logits, targets);
  const Gradients grads = g.backward(loss);
  return {loss.value().item(), grads.of(model.bank().theta_d)};
}

Outcome prdb_exactness() {
  testing::MicroSetup s;
  modulator::RaccModel model(s.hyper, s.hyper, s.world.vocab(), s.racc_config());
  testing::perturb(model.parameters(), 0.2, 5);
  const auto& inst = s.task.train.front();
  const auto retrieved = s.retriever.retrieve(inst, 3);
  const auto answer = s.world.vocab().tokenize(inst.gold_answer());

  const std::vector<std::pair<std::string, std::vector<bool>>> patterns = {
      {"all-true", {true, true, true}},
      {"all-false", {false, false, false}},
      {"one-true", {false, true, false}}};
  double worst = 0.0;
  bool forward_equal = true;
  bool all_false_zero = true;
  for (const auto& [name, flags] : patterns) {
    auto query = modulator::make_query(inst, retrieved, s.task.corpus);
    query.relevant = flags;
    const LossAndGrad gated = gated_pipeline(model, query, answer, true);
    const LossAndGrad ungated = gated_pipeline(model, query, answer, false);
    const LossAndGrad oracle = reduced_graph_oracle(model, query, answer);
    worst = std::max(worst, gated.grad_theta_d.max_abs_diff(oracle.grad_theta_d));
    forward_equal = forward_equal && gated.loss == ungated.loss && gated.loss == oracle.loss;
    if (name == "all-false") all_false_zero = gated.grad_theta_d.norm() == 0.0;
  }
  const bool pass = worst <= 1e-12 && forward_equal && all_false_zero;
  return {pass, "max |dL/dθ_d - oracle| " + sci(worst) +
                    " (<= 1e-12) over all-true/all-false/one-true; forward loss "
                    "identical with gate on/off: " + (forward_equal ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 3. RGCA identity and monotonicity.

Outcome rgca_properties() {
  std::mt19937_64 rng(31);
  const std::size_t d = 16, heads = 4, k = 3, l_d = 16, l_vq = 12;
  auto stack = aggregator::RGCAStack::create("rgca", 3, d, heads, rng);
  std::vector<Parameter*> params;
  stack.collect(params);
  testing::perturb(params, 0.3, 8);
  const Tensor theta = Tensor::randn(l_vq, d, 1.0, rng);
  std::vector<Tensor> doc_values;
  for (std::size_t i = 0; i < k; ++i) doc_values.push_back(Tensor::randn(l_d, d, 1.0, rng));
  const std::vector<double> ones(k, 1.0);
  auto run = [&](bool gating) {
    stack.gating = gating;
    Graph g;
    std::vector<Var> docs;
    for (const auto& t : doc_values) docs.push_back(g.constant(t));
    return aggregator::rgca_forward(g, stack, g.constant(theta), docs, ones).value();
  };
  const double identity_err = run(true).max_abs_diff(run(false));

  // Monotonicity at the gated attention itself, with positive inputs and
  // weights so that every logit row is positive. Weights are kept small so
  // the softmax does not saturate in double precision.
  std::uniform_real_distribution<double> pos(0.05, 1.0);
  auto positive = [&](std::size_t r, std::size_t c, double s = 1.0) {
    Tensor t({r, c});
    for (double& x : t.mutable_data()) x = s * pos(rng);
    return t;
  };
  std::size_t wins = 0, positive_rows = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t kk = 2 + static_cast<std::size_t>(trial % 4);
    const std::size_t ld = 2 + static_cast<std::size_t>(trial % 3);
    const std::size_t lq = 3;
    nn::AttentionWeights w{{"wq", positive(d, d, 0.25)}, {"wk", positive(d, d, 0.25)},
                           {"wv", Tensor::randn(d, d, 1.0, rng)},
                           {"wo", Tensor::randn(d, d, 1.0, rng)}};
    const Tensor query = positive(lq, d);
    const Tensor context = positive(kk * ld, d);
    std::vector<double> scores(kk);
    for (double& sc : scores) sc = pos(rng);
    const std::size_t target = static_cast<std::size_t>(trial) % kk;

    // Independent logit check: (X Wq)(C Wk)^T per head must be positive.
    bool rows_positive = true;
    const std::size_t dh = d / heads;
    for (std::size_t h = 0; h < heads && rows_positive; ++h) {
      for (std::size_t i = 0; i < lq; ++i) {
        for (std::size_t j = 0; j < kk * ld; ++j) {
          double logit = 0.0;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
            double qc = 0.0, kc = 0.0;
            for (std::size_t r = 0; r < d; ++r) {
              qc += query(i, r) * w.wq.value(r, c);
              kc += context(j, r) * w.wk.value(r, c);
            }
            logit += qc * kc;
          }
          rows_positive = rows_positive && logit > 0.0;
        }
      }
    }
    if (!rows_positive) continue;
    ++positive_rows;

    auto mass = [&](const std::vector<double>& sc) {
      const Tensor gate = aggregator::broadcast_scores(sc, heads, lq, ld);
      std::vector<Tensor> trace;
      nn::AttentionOptions opts;
      opts.logit_gate = &gate;
      opts.trace = &trace;
      Graph g;
      nn::multi_head_attention(g, w, g.constant(query), g.constant(context), heads, opts);
      std::vector<double> out;
      for (const Tensor& probs : trace) {
        for (std::size_t i = 0; i < lq; ++i) {
          double m = 0.0;
          for (std::size_t j = target * ld; j < (target + 1) * ld; ++j) m += probs(i, j);
          out.push_back(m);
        }
      }
      return out;
    };
    const auto before = mass(scores);
    auto doubled = scores;
    doubled[target] *= 2.0;
    const auto after = mass(doubled);
    bool all_up = true;
    for (std::size_t i = 0; i < before.size(); ++i) all_up = all_up && after[i] > before[i];
    if (all_up) ++wins;
  }
  const bool pass = identity_err <= 1e-12 && positive_rows == trials && wins == trials;
  return {pass, "all-ones gate vs ungated max diff " + sci(identity_err) +
                    " (<= 1e-12); doubled score raised its mass in " +
                    std::to_string(wins) + "/" + std::to_string(trials) +
                    " trials (all-positive logit rows verified in " +
                    std::to_string(positive_rows) + ")"};
}

// ---------------------------------------------------------------------------
// 7. Metric oracles.

Outcome metric_oracles() {
  std::mt19937_64 rng(77);
  const std::vector<std::string> words{"red", "blue", "green", "new york", "cat"};
  std::uniform_int_distribution<std::size_t> word(0, words.size() - 1);
  std::size_t vqa_agree = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<std::string> answers;
    for (std::size_t i = 0; i < n; ++i) answers.push_back(words[word(rng)]);
    const std::string prediction = words[word(rng)];
    int count = 0;
    for (const auto& a : answers) count += a == prediction ? 1 : 0;
    const double expected = count >= 3 ? 1.0 : count / 3.0;
    if (app::vqa_accuracy(prediction, answers) == expected) ++vqa_agree;
  }
  std::size_t prr_agree = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + rng() % 20;
    const std::size_t k = rng() % 9;
    std::vector<retrieval::RetrievedSet> sets(n);
    std::size_t hits = 0;
    for (auto& s : sets) {
      const std::size_t size = 1 + rng() % 8;
      bool hit = false;
      for (std::size_t i = 0; i < size; ++i) {
        const bool flag = rng() % 4 == 0;
        s.doc_ids.push_back("doc" + std::to_string(i));
        s.doc_indices.push_back(i);
        s.scores.push_back(1.0);
        s.pseudo_relevant.push_back(flag);
        if (flag && (k == 0 || i < k)) hit = true;
      }
      hits += hit ? 1 : 0;
    }
    const double expected = static_cast<double>(hits) / static_cast<double>(n);
    if (retrieval::prrecall_at_k(sets, k) == expected) ++prr_agree;
  }
  const bool pass = vqa_agree == 1000 && prr_agree == 1000;
  return {pass, "vqa_accuracy " + std::to_string(vqa_agree) + "/1000, prrecall_at_k " +
                    std::to_string(prr_agree) + "/1000 exact agreements"};
}

// ---------------------------------------------------------------------------
// Pipeline criteria.

struct Pipeline {
  fs::path root;
  app::RunConfig config;
  double seconds = 0.0;
  app::MetricsReport report;
  std::ofstream log;

  explicit Pipeline(fs::path dir) : root(std::move(dir)), log(root / "log.txt") {
    config.out = root / "main";
  }
};

void copy_upstream(const app::RunPaths& from, const app::RunPaths& to) {
  fs::create_directories(to.dir);
  for (const auto& [a, b] : {std::pair{from.corpus, to.corpus}, {from.train, to.train},
                             {from.val, to.val}, {from.hyper, to.hyper}}) {
    fs::copy_file(a, b, fs::copy_options::overwrite_existing);
  }
}

Outcome learning_efficacy(Pipeline& p) {
  const auto t0 = Clock::now();
  app::cmd_gen(p.config, p.log);
  app::cmd_pretrain(p.config, p.log);
  app::cmd_train(p.config, /*pre_save=*/true, p.log);
  p.report = app::cmd_eval(p.config, p.log);
  p.seconds = seconds_since(t0);

  app::RunConfig off = p.config;
  off.out = p.root / "all_off";
  off.racc.toggles = {false, false, false, false};
  copy_upstream(app::RunPaths(p.config.out), app::RunPaths(off.out));
  app::cmd_train(off, false, p.log);
  const double off_acc = app::cmd_eval(off, p.log).vqa_accuracy;

  const double acc = p.report.vqa_accuracy, base = p.report.baseline_accuracy;
  const bool pass = acc >= 0.80 && acc - base >= 0.30 && acc >= off_acc && p.seconds < 900.0;
  return {pass, "RACC " + fix(100 * acc) + " % vs no-prefix " + fix(100 * base) +
                    " % (gap " + fix(100 * (acc - base)) + " pts, >= 30); all-off " +
                    fix(100 * off_acc) + " % (<= all-on); pipeline " +
                    fix(p.seconds, 0) + " s (< 900 s)"};
}

Outcome cache_equivalence(Pipeline& p) {
  const auto t0 = Clock::now();
  app::RunConfig cfg = p.config;
  const app::RunPaths paths(cfg.out);
  const retrieval::World world(cfg.task);
  const auto corpus = retrieval::read_corpus(paths.corpus, world.vocab());
  auto hyper = tinylm::TinyLM::load(paths.hyper);
  hyper.set_trainable(false);
  modulator::RaccModel model(hyper, hyper, world.vocab(), cfg.racc);
  model.load(paths.racc);
  const fs::path rebuilt = p.root / "rebuilt.rcc";
  cachestore::build_cache(corpus, model.compressor(), rebuilt);
  const bool same_file = slurp(rebuilt) == slurp(paths.cache);

  const auto val = retrieval::read_instances(paths.val, world.vocab());
  cfg.bench_instances = val.size();
  const app::LatencyReport bench = app::cmd_bench(cfg, p.log);
  const double secs = seconds_since(t0);
  const bool pass = bench.answers_identical && same_file && bench.saving() >= 0.25 &&
                    secs < 300.0;
  return {pass, std::string("answers token-identical over ") +
                    std::to_string(bench.instances) + " val instances: " +
                    (bench.answers_identical ? "yes" : "no") + "; latency " +
                    fix(1e3 * bench.without_cache_s) + " -> " +
                    fix(1e3 * bench.with_cache_s) + " ms (saving " +
                    fix(100 * bench.saving(), 1) + " %, >= 25 %); rebuild byte-identical: " +
                    (same_file ? "yes" : "no") + "; " + fix(secs, 0) + " s (< 300 s)"};
}

// Copies of every parameter group, for change detection.
struct Groups {
  std::vector<std::vector<Tensor>> values;
  static Groups of(const modulator::RaccModel& m) {
    Groups g;
    auto take = [&](const std::vector<const Parameter*>& ps) {
      std::vector<Tensor> v;
      for (const Parameter* p : ps) v.push_back(p->value);
      g.values.push_back(v);
    };
    take({&m.bank().theta_d});
    take({&m.bank().theta_vq});
    std::vector<const Parameter*> ca, rgca, mlps;
    m.dcse().collect(ca);
    m.rgca().collect(rgca);
    m.mlps().collect(mlps);
    take(ca);
    take(rgca);
    take(mlps);
    return g;
  }
};

Outcome frozen_contract(Pipeline& p) {
  const app::RunPaths paths(p.config.out);
  const retrieval::World world(p.config.task);
  const std::string stage0 = slurp(paths.hyper);
  auto hyper = tinylm::TinyLM::load(paths.hyper);
  hyper.set_trainable(false);
  const auto corpus = retrieval::read_corpus(paths.corpus, world.vocab());
  const auto train = retrieval::read_instances(paths.train, world.vocab());
  retrieval::Retriever retriever(world);
  retriever.index(corpus);
  std::vector<modulator::TrainExample> examples;
  for (const auto& inst : train) {
    examples.push_back({&inst, retriever.retrieve(inst, p.config.train.k),
                        world.vocab().tokenize(inst.gold_answer())});
  }
  modulator::RaccModel model(hyper, hyper, world.vocab(), p.config.racc);
  const Groups before = Groups::of(model);
  model.compressor().set_memoize(true);
  modulator::Trainer trainer(model, corpus, examples, p.config.train);
  for (int i = 0; i < 500; ++i) trainer.step();
  const Groups after = Groups::of(model);
  const bool homo_frozen = hyper.serialize() == stage0;

  // Hetero: a separate decoder-only base must stay frozen as well.
  testing::MicroSetup s;
  tinylm::ModelConfig base_cfg = testing::micro_model_config(s.world.vocab().size(), 12, 2);
  base_cfg.arch = tinylm::ArchKind::kDecoderOnly;
  base_cfg.n_enc_layers = 0;
  base_cfg.n_dec_layers = 2;
  tinylm::TinyLM base(base_cfg, 4);
  base.set_trainable(false);
  const std::string hyper0 = s.hyper.serialize(), base0 = base.serialize();
  modulator::RaccModel hetero(s.hyper, base, s.world.vocab(), s.racc_config());
  modulator::TrainConfig cfg;
  cfg.k = 2;
  cfg.schedule.warmup_steps = 50;
  cfg.schedule.total_steps = 500;
  modulator::Trainer micro(hetero, s.task.corpus, s.examples(2), cfg);
  const Groups hb = Groups::of(hetero);
  for (int i = 0; i < 500; ++i) micro.step();
  const Groups ha = Groups::of(hetero);
  const bool hetero_frozen = s.hyper.serialize() == hyper0 && base.serialize() == base0;

  const char* names[] = {"θ_d", "θ_vq", "CA", "RGCA", "MLPs"};
  std::string changed;
  bool all_changed = true;
  for (std::size_t i = 0; i < 5; ++i) {
    const bool c = before.values[i] != after.values[i] && hb.values[i] != ha.values[i];
    all_changed = all_changed && c;
    changed += std::string(i ? ", " : "") + names[i] + (c ? " changed" : " unchanged");
  }
  const bool pass = homo_frozen && hetero_frozen && all_changed;
  return {pass, std::string("after 500 steps hyper/base byte-identical to Stage-0: homo ") +
                    (homo_frozen ? "yes" : "no") + ", hetero " +
                    (hetero_frozen ? "yes" : "no") + "; " + changed};
}

Outcome determinism(Pipeline& p) {
  app::RunConfig again = p.config;
  again.out = p.root / "again";
  copy_upstream(app::RunPaths(p.config.out), app::RunPaths(again.out));
  app::cmd_train(again, /*pre_save=*/true, p.log);
  const app::MetricsReport second = app::cmd_eval(again, p.log);
  const auto losses = [](const fs::path& path) {
    std::ifstream in(path);
    return nlohmann::json::parse(in).at("losses");
  };
  const bool same_losses = losses(app::RunPaths(p.config.out).train_log) ==
                           losses(app::RunPaths(again.out).train_log);
  const bool same_report = p.report.to_json(false) == second.to_json(false);
  return {same_losses && same_report,
          std::string("loss trajectories identical: ") + (same_losses ? "yes" : "no") +
              "; metrics reports identical (wall-clock excluded): " +
              (same_report ? "yes" : "no")};
}

}  // namespace

int main() {
  const char* env = std::getenv("RACC_ACCEPTANCE_DIR");
  const fs::path root = env ? fs::path(env)
                            : fs::temp_directory_path() /
                                  ("racc_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  std::cout << "RACC acceptance (work dir " << root.string() << ")" << std::endl;

  report(1, "gradient suite", gradient_suite);
  report(2, "PRDB exactness", prdb_exactness);
  report(3, "RGCA identity and monotonicity", rgca_properties);

  Pipeline p(root);
  bool pipeline_ok = true;
  report(6, "learning efficacy on the default task", [&] {
    Outcome o = learning_efficacy(p);
    pipeline_ok = fs::exists(app::RunPaths(p.config.out).racc);
    return o;
  });
  auto needs_pipeline = [&](const std::function<Outcome(Pipeline&)>& f) {
    return [&, f] {
      if (!pipeline_ok) return Outcome{false, "default pipeline did not complete"};
      return f(p);
    };
  };
  report(5, "pre-saved prompt equivalence and latency", needs_pipeline(cache_equivalence));
  report(4, "frozen contract", needs_pipeline(frozen_contract));
  report(7, "metric oracles", metric_oracles);
  report(8, "determinism", needs_pipeline(determinism));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  if (!std::getenv("RACC_KEEP_ACCEPTANCE_DIR") && !env) fs::remove_all(root);
  return failures == 0 ? 0 : 1;
}
