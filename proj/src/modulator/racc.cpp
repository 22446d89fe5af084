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

#include "racc/modulator/racc.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace racc::modulator {

static_assert(std::endian::native == std::endian::little,
              "snapshots are little-endian");

namespace {

constexpr char kMagic[4] = {'R', 'A', 'C', 'C'};

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

compressor::PromptBank make_bank(const tinylm::TinyLM& hyper,
                                 const tinylm::Vocabulary& vocab,
                                 const RaccConfig& c) {
  if (c.toggles.pipe) {
    return compressor::pipe_init(retrieval::World::doc_hard_prompt(),
                                 retrieval::World::vq_hard_prompt(), vocab,
                                 hyper.embedding_table(), c.l_d, c.l_vq);
  }
  auto rng = stream(c.seed, 1);
  return compressor::random_init(c.l_d, c.l_vq, hyper.config().d_model, 1.0, rng);
}

std::uint32_t toggle_bits(const Toggles& t) {
  return (t.pipe ? 1u : 0u) | (t.prdb ? 2u : 0u) | (t.dcse ? 4u : 0u) |
         (t.rgca ? 8u : 0u);
}

std::vector<std::uint32_t> header_fields(const RaccModel& m) {
  const RaccConfig& c = m.config();
  return {static_cast<std::uint32_t>(c.l_d),
          static_cast<std::uint32_t>(c.l_vq),
          static_cast<std::uint32_t>(c.n_r),
          static_cast<std::uint32_t>(c.n_heads),
          static_cast<std::uint32_t>(m.hyper().config().d_model),
          static_cast<std::uint32_t>(m.base().config().d_model),
          static_cast<std::uint32_t>(m.mlps().layers()),
          static_cast<std::uint32_t>(
              m.mlps().mlps.front().hidden.weight.value.cols()),
          toggle_bits(c.toggles)};
}

}  // namespace

std::string Toggles::label() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    s += s.empty() ? "" : " ";
    s += std::string(on ? "+" : "-") + name;
  };
  add(pipe, "PIPE");
  add(dcse, "DCSE");
  add(rgca, "RGCA");
  add(prdb, "PRDB");
  return s;
}

RaccModel::RaccModel(const tinylm::TinyLM& hyper, const tinylm::TinyLM& base,
                     const tinylm::Vocabulary& vocab, const RaccConfig& config)
    : config_(config),
      hyper_(&hyper),
      base_(&base),
      bank_(make_bank(hyper, vocab, config)),
      dcse_([&] {
        auto rng = stream(config.seed, 2);
        return aggregator::CrossAttentionBlock::create(
            "dcse", hyper.config().d_model, config.n_heads, rng);
      }()),
      rgca_([&] {
        auto rng = stream(config.seed, 3);
        auto s = aggregator::RGCAStack::create("rgca", config.n_r,
                                               hyper.config().d_model,
                                               config.n_heads, rng);
        s.gating = config.toggles.rgca;
        return s;
      }()),
      mlps_([&] {
        auto rng = stream(config.seed, 4);
        const std::size_t d_h = hyper.config().d_model;
        return MLPSet::create(base.config().prefix_layers(), d_h,
                              config.mlp_hidden ? config.mlp_hidden : 2 * d_h,
                              base.config().d_model, rng);
      }()),
      compressor_(hyper, bank_) {}

std::vector<Parameter*> RaccModel::parameters() {
  std::vector<Parameter*> out = bank_.parameters();
  dcse_.collect(out);
  rgca_.collect(out);
  mlps_.collect(out);
  return out;
}

std::vector<const Parameter*> RaccModel::parameters() const {
  std::vector<const Parameter*> out = bank_.parameters();
  dcse_.collect(out);
  rgca_.collect(out);
  mlps_.collect(out);
  return out;
}

void RaccModel::write(std::ostream& os) const {
  os.write(kMagic, sizeof(kMagic));
  for (std::uint32_t v : header_fields(*this)) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  for (const Parameter* p : parameters()) {
    const auto bytes = std::as_bytes(p->value.data());
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  }
}

void RaccModel::read(std::istream& is) {
  char magic[4] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a RACC parameter snapshot");
  }
  for (std::uint32_t want : header_fields(*this)) {
    std::uint32_t got = 0;
    is.read(reinterpret_cast<char*>(&got), sizeof(got));
    if (!is || got != want) {
      throw std::runtime_error(
          "RACC snapshot was written for a different configuration");
    }
  }
  for (Parameter* p : parameters()) {
    auto bytes = std::as_writable_bytes(p->value.mutable_data());
    is.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!is) {
      throw std::runtime_error("RACC snapshot truncated at '" + p->name + "'");
    }
  }
}

void RaccModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write(os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void RaccModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  read(is);
}

std::string RaccModel::serialize() const {
  std::ostringstream os(std::ios::binary);
  write(os);
  return os.str();
}

RaccQuery make_query(const retrieval::VQAInstance& instance,
                     const retrieval::RetrievedSet& retrieved,
                     const std::vector<retrieval::Document>& corpus) {
  RaccQuery q;
  q.image = &instance.image;
  q.question = instance.question;
  for (std::size_t i : retrieved.doc_indices) q.docs.push_back(&corpus.at(i));
  q.scores = retrieved.scores;
  q.relevant = retrieved.pseudo_relevant;
  return q;
}

PrefixKV build_modulation(Graph& g, const RaccModel& model,
                          const RaccQuery& query, bool training,
                          const cachestore::PromptCache* cache) {
  if (query.image == nullptr) throw std::invalid_argument("racc: no image");
  if (query.docs.empty()) throw std::invalid_argument("racc: no documents");
  if (query.scores.size() != query.docs.size()) {
    throw std::invalid_argument("racc: scores and documents differ in count");
  }
  const Toggles& t = model.config().toggles;
  const compressor::Compressor& comp = model.compressor();

  std::vector<compressor::CompressedPrompt> docs;
  docs.reserve(query.docs.size());
  for (const retrieval::Document* d : query.docs) {
    if (cache != nullptr) {
      docs.push_back({g.constant(cache->load_prompt(d->id)),
                      compressor::SourceKind::kDocument, d->id});
    } else {
      docs.push_back(comp.compress_document(g, *d));
    }
  }
  if (training && t.prdb) docs = compressor::prdb_gate(docs, query.relevant);

  std::vector<Var> doc_rows;
  doc_rows.reserve(docs.size());
  for (const auto& p : docs) doc_rows.push_back(p.rows);

  Var joint = comp.compress_joint(g, *query.image, query.question).rows;
  if (t.dcse) {
    const std::vector<int> question(query.question.begin(), query.question.end());
    Var theta_v = comp.compress_decoupled(g, query.image, nullptr).rows;
    Var theta_q = comp.compress_decoupled(g, nullptr, &question).rows;
    doc_rows = aggregator::dcse_enhance(g, model.dcse(), doc_rows, theta_v, theta_q);
  }
  Var star = aggregator::rgca_forward(g, model.rgca(), joint, doc_rows, query.scores);
  return generate_modulation(g, star, model.mlps(), model.base().config());
}

Var racc_logits(Graph& g, const RaccModel& model, const RaccQuery& query,
                std::span<const int> decoder_ids, bool training,
                const cachestore::PromptCache* cache) {
  PrefixKV prefix = build_modulation(g, model, query, training, cache);
  Var context = tinylm::build_context(g, model.base(), *query.image, query.question);
  return tinylm::base_forward(g, model.base(), context, decoder_ids, &prefix);
}

std::vector<int> racc_answer(const RaccModel& model, const RaccQuery& query,
                             std::size_t max_len,
                             const cachestore::PromptCache* cache) {
  Graph g;
  PrefixKV prefix = build_modulation(g, model, query, /*training=*/false, cache);
  Var context = tinylm::build_context(g, model.base(), *query.image, query.question);
  return tinylm::generate(g, model.base(), context, &prefix, max_len);
}

}  // namespace racc::modulator
