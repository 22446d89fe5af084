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


#include <random>
#include <sstream>

#include "doctest.h"
#include "racc/app/pretrain.h"
#include "racc/retrieval/task.h"
#include "racc/tinylm/model.h"
#include "racc/tinylm/vocab.h"
#include "support/micro.h"

using namespace racc;
using tinylm::PrefixKV;
using tinylm::TinyLM;
using tinylm::Vocabulary;

namespace {

PrefixKV random_prefix(Graph& g, std::size_t layers, std::size_t len, std::size_t d,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PrefixKV p;
  for (std::size_t l = 0; l < layers; ++l) {
    p.keys.push_back(g.constant(Tensor::randn(len, d, 1.0, rng)));
    p.values.push_back(g.constant(Tensor::randn(len, d, 1.0, rng)));
  }
  return p;
}

}  // namespace

TEST_SUITE("tinylm") {

TEST_CASE("tokenize is a table lookup and round-trips") {
  const retrieval::World world(testing::micro_task_config());
  const Vocabulary& v = world.vocab();
  const auto ids = v.tokenize("color of ent_7");
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == v.id("color"));
  CHECK(ids[1] == v.id("of"));
  CHECK(ids[2] == v.id("ent_7"));
  CHECK(v.tokenize("").empty());
  CHECK_THROWS_AS(v.tokenize("zebra"), tinylm::OutOfVocabularyError);
}

TEST_CASE("round trip over 1000 generated sentences") {
  const retrieval::World world(retrieval::TaskConfig{});
  std::mt19937_64 rng(5);
  int ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t e = rng() % world.n_entities();
    const std::size_t a = rng() % world.n_attributes();
    const std::string text = i % 2 ? world.fact_text(e, a, world.fact(e, a), rng)
                                   : world.distractor_text(e, rng);
    ok += world.vocab().detokenize(world.vocab().tokenize(text)) == text ? 1 : 0;
  }
  CHECK(ok == 1000);
}

TEST_CASE("reserved ids sit below eight") {
  const Vocabulary v({"alpha", "beta"});
  CHECK(Vocabulary::kPad < Vocabulary::kReserved);
  CHECK(Vocabulary::kBos < Vocabulary::kReserved);
  CHECK(Vocabulary::kEos < Vocabulary::kReserved);
  CHECK(Vocabulary::kImage < Vocabulary::kReserved);
  CHECK(Vocabulary::kReserved <= 8);
  CHECK(v.id("alpha") >= Vocabulary::kReserved);
}

TEST_CASE("config validation") {
  tinylm::ModelConfig c = testing::micro_model_config(300);
  c.n_heads = 3;
  CHECK_THROWS(c.validate());
  c = testing::micro_model_config(300);
  c.arch = tinylm::ArchKind::kDecoderOnly;
  CHECK_THROWS(c.validate());
  c.n_enc_layers = 0;
  CHECK_NOTHROW(c.validate());
  CHECK(c.prefix_layers() == 1);
}

TEST_CASE("encoder shapes, determinism and position sensitivity") {
  testing::MicroSetup s(16, 2);
  const auto ids = s.world.vocab().tokenize("color of ent_3 ?");
  Graph g;
  Var a = s.hyper.encode(g, s.hyper.embed_tokens(g, ids));
  Var b = s.hyper.encode(g, s.hyper.embed_tokens(g, ids));
  CHECK(a.rows() == ids.size());
  CHECK(a.cols() == 16);
  CHECK(a.value() == b.value());
  std::vector<int> swapped = ids;
  std::swap(swapped[0], swapped[2]);
  Var c = s.hyper.encode(g, s.hyper.embed_tokens(g, swapped));
  CHECK(c.value().max_abs_diff(a.value()) > 1e-6);
  CHECK_THROWS_AS(s.hyper.encode(g, g.constant(Tensor::zeros(1, 5))), ShapeError);
}

TEST_CASE("decoder maps L prompts to L rows and rejects width mismatch") {
  testing::MicroSetup s(16, 2);
  const auto ids = s.world.vocab().tokenize("color of ent_3 ?");
  std::mt19937_64 rng(2);
  Graph g;
  Var enc = s.hyper.encode(g, s.hyper.embed_tokens(g, ids));
  CHECK(s.hyper.decode(g, g.constant(Tensor::randn(16, 16, 1.0, rng)), enc).rows() == 16);
  CHECK(s.hyper.decode(g, g.constant(Tensor::randn(12, 16, 1.0, rng)), enc).rows() == 12);
  CHECK_THROWS_AS(s.hyper.decode(g, g.constant(Tensor::zeros(4, 8)), enc), ShapeError);
}

TEST_CASE("prefix attention rows sum to one and the prefix is live") {
  testing::MicroSetup s(16, 2);
  const auto& inst = s.task.train.front();
  const std::vector<int> dec{Vocabulary::kBos, 9, 10};
  const std::size_t m = s.hyper.config().prefix_layers();

  Graph g;
  Var ctx = tinylm::build_context(g, s.hyper, inst.image, inst.question);
  PrefixKV p1 = random_prefix(g, m, 12, 16, 1);
  PrefixKV p2 = random_prefix(g, m, 12, 16, 2);
  tinylm::AttentionTrace trace;
  Var l1 = tinylm::base_forward(g, s.hyper, ctx, dec, &p1, &trace);
  Var l2 = tinylm::base_forward(g, s.hyper, ctx, dec, &p2);
  CHECK(l1.value().max_abs_diff(l2.value()) > 1e-9);
  REQUIRE(!trace.empty());
  for (const Tensor& probs : trace) {
    CHECK(probs.cols() >= 12);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < probs.cols(); ++j) row += probs(i, j);
      CHECK(std::abs(row - 1.0) < 1e-9);
    }
  }
  // Encoder self-attention: L_mod + sequence columns.
  CHECK(trace.front().cols() == 12 + ctx.rows());

  PrefixKV short_prefix = random_prefix(g, m + 1, 12, 16, 3);
  CHECK_THROWS_AS(tinylm::base_forward(g, s.hyper, ctx, dec, &short_prefix), ShapeError);
}

TEST_CASE("causal decoding: later tokens do not affect earlier logits") {
  testing::MicroSetup s(16, 2);
  const auto& inst = s.task.train.front();
  Graph g;
  Var ctx = tinylm::build_context(g, s.hyper, inst.image, inst.question);
  const std::vector<int> a{Vocabulary::kBos, 9, 10};
  const std::vector<int> b{Vocabulary::kBos, 9, 11};
  const Tensor la = tinylm::base_forward(g, s.hyper, ctx, a).value();
  const Tensor lb = tinylm::base_forward(g, s.hyper, ctx, b).value();
  CHECK(la.row_block(0, 2) == lb.row_block(0, 2));
  CHECK(la.row_block(2, 3).max_abs_diff(lb.row_block(2, 3)) > 0.0);
}

TEST_CASE("generation is deterministic and bounded") {
  testing::MicroSetup s(16, 2);
  const auto& inst = s.task.train.front();
  const auto a = tinylm::generate(s.hyper, inst.image, inst.question, nullptr, 4);
  const auto b = tinylm::generate(s.hyper, inst.image, inst.question, nullptr, 4);
  CHECK(a == b);
  CHECK(a.size() <= 4);
  CHECK(tinylm::generate(s.hyper, inst.image, inst.question, nullptr, 1).size() <= 1);
}

TEST_CASE("image embedding shapes and entity codes") {
  testing::MicroSetup s(16, 2);
  Graph g;
  const auto& img = s.world.entity_image(0);
  CHECK(s.hyper.embed_image(g, img).rows() == img.num_patches());
  CHECK(s.hyper.embed_image(g, img).value() == s.hyper.embed_image(g, s.world.entity_image(0)).value());
  CHECK(s.hyper.embed_image(g, img).value().max_abs_diff(
            s.hyper.embed_image(g, s.world.entity_image(1)).value()) > 0.0);
  tinylm::SyntheticImage bad{Tensor::zeros(16, 5)};
  CHECK_THROWS_AS(s.hyper.embed_image(g, bad), ShapeError);
}

TEST_CASE("frozen parameters receive no gradient") {
  testing::MicroSetup s(16, 2);
  std::mt19937_64 rng(4);
  Parameter prompts{"prompts", Tensor::randn(4, 16, 1.0, rng)};
  Graph g;
  const auto ids = s.world.vocab().tokenize("color of ent_3 ?");
  Var enc = s.hyper.encode(g, s.hyper.embed_tokens(g, ids));
  const Gradients grads = g.backward(sum(s.hyper.decode(g, g.param(prompts), enc)));
  CHECK(grads.of(prompts).norm() > 0.0);
  for (const Parameter* p : std::as_const(s.hyper).parameters()) {
    CHECK(grads.of(*p).norm() == 0.0);
  }
}

TEST_CASE("snapshot round trip for both architectures") {
  testing::MicroSetup s(16, 2);
  std::stringstream ss;
  s.hyper.write(ss);
  const TinyLM back = TinyLM::read(ss);
  CHECK(back.serialize() == s.hyper.serialize());
  CHECK(back.checksum() == s.hyper.checksum());
  CHECK(s.hyper.serialize().substr(0, 4) == "TLM1");

  tinylm::ModelConfig dc = testing::micro_model_config(s.world.vocab().size(), 12, 2);
  dc.arch = tinylm::ArchKind::kDecoderOnly;
  dc.n_enc_layers = 0;
  const TinyLM dec(dc, 5);
  std::stringstream ds;
  dec.write(ds);
  CHECK(TinyLM::read(ds).serialize() == dec.serialize());
  std::stringstream junk("XXXX");
  CHECK_THROWS(TinyLM::read(junk));
}

TEST_CASE("pretrained hyper model answers with gold knowledge in context") {
  // Stage-0 quality on held-out, independently sampled examples.
  const retrieval::World world(retrieval::TaskConfig{});
  tinylm::ModelConfig mc;
  mc.vocab_size = world.vocab().size();
  TinyLM model(mc, 1);
  app::pretrain(model, world, app::PretrainConfig{});
  CHECK(app::in_context_accuracy(model, world, 400, 12345) >= 0.95);
}

}  // TEST_SUITE
