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


#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "racc/modulator/modulation.h"
#include "racc/modulator/racc.h"
#include "racc/modulator/trainer.h"
#include "support/micro.h"

using namespace racc;
using modulator::MLPSet;
using modulator::RaccModel;
using modulator::Trainer;

namespace {

tinylm::ModelConfig hetero_base_config(std::size_t vocab) {
  tinylm::ModelConfig c;
  c.arch = tinylm::ArchKind::kDecoderOnly;
  c.d_model = 96;
  c.n_heads = 4;
  c.n_enc_layers = 0;
  c.n_dec_layers = 4;
  c.d_ff = 192;
  c.vocab_size = vocab;
  return c;
}

modulator::TrainConfig short_schedule(std::size_t k, std::int64_t steps) {
  modulator::TrainConfig c;
  c.k = k;
  c.schedule.warmup_steps = std::max<std::int64_t>(1, steps / 10);
  c.schedule.total_steps = steps;
  return c;
}

}  // namespace

TEST_SUITE("modulator") {

TEST_CASE("modulation shapes for homo and hetero bases") {
  std::mt19937_64 rng(1);
  tinylm::ModelConfig homo;
  homo.vocab_size = 300;
  MLPSet mlps = MLPSet::create(4, 64, 128, 64, rng);
  std::vector<Parameter*> params;
  mlps.collect(params);
  testing::perturb(params, 0.1, 2);
  Graph g;
  Var star = g.constant(Tensor::randn(12, 64, 1.0, rng));
  const auto prefix = modulator::generate_modulation(g, star, mlps, homo);
  REQUIRE(prefix.layers() == 4);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(prefix.keys[l].value().shape() == Shape{12, 64});
    CHECK(prefix.values[l].value().shape() == Shape{12, 64});
  }

  const MLPSet wide = MLPSet::create(4, 64, 128, 96, rng);
  const auto hetero = modulator::generate_modulation(g, star, wide, hetero_base_config(300));
  CHECK(hetero.keys[0].value().shape() == Shape{12, 96});

  tinylm::ModelConfig deeper = homo;
  deeper.n_dec_layers = 3;
  CHECK_THROWS(modulator::generate_modulation(g, star, mlps, deeper));
}

TEST_CASE("zero-initialized output layers give an all-zero prefix") {
  std::mt19937_64 rng(3);
  tinylm::ModelConfig homo;
  homo.vocab_size = 300;
  const MLPSet mlps = MLPSet::create(4, 64, 128, 64, rng);
  Graph g;
  const auto prefix = modulator::generate_modulation(
      g, g.constant(Tensor::randn(12, 64, 1.0, rng)), mlps, homo);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(prefix.keys[l].value().norm() == 0.0);
    CHECK(prefix.values[l].value().norm() == 0.0);
  }
}

TEST_CASE("teacher forcing and the answer-only loss") {
  const std::vector<int> answer{11, 12};
  const auto [inputs, targets] = modulator::teacher_forcing(answer);
  CHECK(inputs == std::vector<int>{tinylm::Vocabulary::kBos, 11, 12});
  CHECK(targets == std::vector<int>{11, 12, tinylm::Vocabulary::kEos});

  Graph g;
  const std::size_t v = 20;
  CHECK(modulator::lm_loss(g.constant(Tensor::zeros(3, v)), targets).value().item() ==
        doctest::Approx(std::log(double(v))).epsilon(1e-14));

  Tensor onehot = Tensor::full(3, v, -50.0);
  for (std::size_t r = 0; r < 3; ++r) onehot(r, static_cast<std::size_t>(targets[r])) = 50.0;
  CHECK(modulator::lm_loss(g.constant(onehot), targets).value().item() < 1e-30);

  const std::vector<int> masked{-1, 12, -1};
  std::mt19937_64 rng(4);
  Tensor logits = Tensor::randn(3, v, 1.0, rng);
  const double before = modulator::lm_loss(g.constant(logits), masked).value().item();
  for (std::size_t c = 0; c < v; ++c) {
    logits(0, c) += 3.0;
    logits(2, c) *= -2.0;
  }
  CHECK(modulator::lm_loss(g.constant(logits), masked).value().item() == before);
  CHECK_THROWS(modulator::lm_loss(g.constant(logits), std::vector<int>{-1, -1, -1}));
}

TEST_CASE("end-to-end micro pipeline matches central differences") {
  CHECK(testing::end_to_end_gradient_error(2) < 1e-5);
}

TEST_CASE("toggles select initialization and gating") {
  testing::MicroSetup s(16, 2);
  modulator::RaccConfig on = s.racc_config(2);
  modulator::RaccConfig off = on;
  off.toggles = {false, false, false, false};
  const RaccModel a(s.hyper, s.hyper, s.world.vocab(), on);
  const RaccModel b(s.hyper, s.hyper, s.world.vocab(), off);
  CHECK(a.rgca().gating);
  CHECK_FALSE(b.rgca().gating);
  CHECK(a.bank().theta_d.value != b.bank().theta_d.value);
  CHECK(on.toggles.label() == "+PIPE +DCSE +RGCA +PRDB");
  CHECK(a.parameters().size() == b.parameters().size());
}

TEST_CASE("training overfits a fixed tiny batch") {
  testing::MicroSetup s(16, 2);
  RaccModel model(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
  auto examples = s.examples(2);
  examples.resize(2);
  auto cfg = short_schedule(2, 200);
  cfg.schedule.lr_peak = 1e-2;
  Trainer trainer(model, s.task.corpus, examples, cfg);
  std::vector<const modulator::TrainExample*> batch{&examples[0], &examples[1]};
  std::vector<double> losses;
  for (int i = 0; i < 200; ++i) losses.push_back(trainer.train_step(batch));
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 20; ++i) {
    head += losses[static_cast<std::size_t>(i)];
    tail += losses[losses.size() - 1 - static_cast<std::size_t>(i)];
  }
  // The random frozen base caps how far a prefix alone can push the loss.
  CHECK(tail < 0.6 * head);
  // Allow small non-monotone wiggles between 20-step windows.
  for (std::size_t w = 1; w < 10; ++w) {
    double prev = 0.0, cur = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      prev += losses[(w - 1) * 20 + i];
      cur += losses[w * 20 + i];
    }
    CHECK(cur <= prev * 1.10);
  }
}

TEST_CASE("an all-irrelevant batch leaves theta_d untouched") {
  testing::MicroSetup s(16, 2);
  RaccModel model(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
  auto examples = s.examples(2);
  examples.resize(2);
  for (auto& ex : examples) ex.retrieved.pseudo_relevant.assign(ex.retrieved.size(), false);
  auto cfg = short_schedule(2, 20);
  // Decoupled weight decay would move θ_d on its own.
  cfg.adamw.weight_decay = 0.0;
  Trainer trainer(model, s.task.corpus, examples, cfg);
  const Tensor d0 = model.bank().theta_d.value;
  const Tensor vq0 = model.bank().theta_vq.value;
  std::vector<const modulator::TrainExample*> batch{&examples[0], &examples[1]};
  // Zero-initialized MLP outputs block all upstream gradient on the first step.
  for (int i = 0; i < 3; ++i) trainer.train_step(batch);
  CHECK(model.bank().theta_d.value == d0);
  CHECK(model.bank().theta_vq.value != vq0);
}

TEST_CASE("training changes only RACC parameters") {
  testing::MicroSetup s(16, 2);
  tinylm::TinyLM base(hetero_base_config(s.world.vocab().size()), 9);
  base.set_trainable(false);
  const std::string hyper0 = s.hyper.serialize(), base0 = base.serialize();
  RaccModel model(s.hyper, base, s.world.vocab(), s.racc_config(2));
  Trainer trainer(model, s.task.corpus, s.examples(2), short_schedule(2, 30));
  trainer.run();
  CHECK(trainer.steps_done() == 30);
  CHECK(s.hyper.serialize() == hyper0);
  CHECK(base.serialize() == base0);
  for (double l : trainer.losses()) CHECK(std::isfinite(l));
}

TEST_CASE("identical seeds give identical loss trajectories") {
  testing::MicroSetup s(16, 2);
  auto run = [&] {
    RaccModel model(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
    Trainer trainer(model, s.task.corpus, s.examples(2), short_schedule(2, 25));
    trainer.run();
    return std::pair{trainer.losses(), model.serialize()};
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite values abort training with a diagnostic") {
  testing::MicroSetup s(16, 2);
  RaccModel model(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
  testing::perturb(model.parameters(), 0.1, 5);
  for (Parameter* p : model.parameters()) {
    if (p->name == "theta_vq") p->value(0, 0) = std::nan("");
  }
  auto examples = s.examples(2);
  Trainer trainer(model, s.task.corpus, examples, short_schedule(2, 10));
  try {
    trainer.step();
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find("non-finite training loss") != std::string::npos);
    CHECK(what.find("(instances: ") != std::string::npos);
  }
}

TEST_CASE("trainer validates its configuration") {
  testing::MicroSetup s(16, 2);
  RaccModel model(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
  auto cfg = short_schedule(2, 10);
  cfg.batch_size = 0;
  CHECK_THROWS(Trainer(model, s.task.corpus, s.examples(2), cfg));
  cfg = short_schedule(3, 10);
  CHECK_THROWS(Trainer(model, s.task.corpus, s.examples(2), cfg));
}

TEST_CASE("snapshot round trip and header check") {
  testing::MicroSetup s(16, 2);
  RaccModel a(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
  testing::perturb(a.parameters(), 0.1, 3);
  const std::string bytes = a.serialize();
  CHECK(bytes.substr(0, 4) == "RACC");
  RaccModel b(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
  std::stringstream in(bytes);
  b.read(in);
  CHECK(b.serialize() == bytes);

  auto other = s.racc_config(2);
  other.l_d = 8;
  RaccModel c(s.hyper, s.hyper, s.world.vocab(), other);
  std::stringstream again(bytes);
  CHECK_THROWS(c.read(again));
}

TEST_CASE("inference is deterministic and bounded") {
  testing::MicroSetup s(16, 2);
  RaccModel model(s.hyper, s.hyper, s.world.vocab(), s.racc_config(2));
  testing::perturb(model.parameters(), 0.1, 4);
  const auto& inst = s.task.val.front();
  const auto query = modulator::make_query(inst, s.retriever.retrieve(inst, 5), s.task.corpus);
  CHECK(query.docs.size() == 5);
  const auto a = modulator::racc_answer(model, query, 4);
  CHECK(a == modulator::racc_answer(model, query, 4));
  CHECK(a.size() <= 4);
}

}  // TEST_SUITE
