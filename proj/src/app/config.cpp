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


#include "racc/app/config.h"

#include <fstream>
#include <set>
#include <stdexcept>

namespace racc::app {

using nlohmann::json;

namespace {

// Reads `key` into `out` when present and records it as known.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) {
      throw std::invalid_argument("config: '" + section_ + "' must be an object");
    }
  }

  template <typename T>
  Reader& field(const char* key, T& out) {
    known_.insert(key);
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw std::invalid_argument("config: bad value for '" + path(key) +
                                    "': " + e.what());
      }
    }
    return *this;
  }

  const json* child(const char* key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const {
    return section_.empty() ? key : section_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!known_.count(key)) {
        throw std::invalid_argument("config: unknown key '" + path(key) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> known_;
};

json model_json(const tinylm::ModelConfig& m) {
  return {{"d_model", m.d_model},       {"n_heads", m.n_heads},
          {"n_enc_layers", m.n_enc_layers}, {"n_dec_layers", m.n_dec_layers},
          {"d_ff", m.d_ff}};
}

void read_model(const json& j, const std::string& name, tinylm::ModelConfig& m) {
  Reader(j, name)
      .field("d_model", m.d_model)
      .field("n_heads", m.n_heads)
      .field("n_enc_layers", m.n_enc_layers)
      .field("n_dec_layers", m.n_dec_layers)
      .field("d_ff", m.d_ff)
      .finish();
}

}  // namespace

const char* variant_name(Variant v) {
  return v == Variant::kHomo ? "homo" : "hetero";
}

Variant parse_variant(const std::string& text) {
  if (text == "homo") return Variant::kHomo;
  if (text == "hetero") return Variant::kHetero;
  throw std::invalid_argument("variant must be 'homo' or 'hetero', got '" +
                              text + "'");
}

RunConfig::RunConfig() {
  hetero_base.arch = tinylm::ArchKind::kDecoderOnly;
  hetero_base.d_model = 96;
  hetero_base.n_heads = 4;
  hetero_base.n_enc_layers = 0;
  hetero_base.n_dec_layers = 4;
  hetero_base.d_ff = 192;
}

void RunConfig::set_seed(std::uint64_t seed) {
  task.seed = seed;
  racc.seed = seed;
  train.seed = seed;
}

tinylm::ModelConfig RunConfig::resolved_hyper(std::size_t vocab_size) const {
  tinylm::ModelConfig m = hyper_model;
  m.arch = tinylm::ArchKind::kEncoderDecoder;
  m.vocab_size = vocab_size;
  m.patch_width = task.patch_width;
  return m;
}

tinylm::ModelConfig RunConfig::resolved_base(std::size_t vocab_size) const {
  if (variant == Variant::kHomo) return resolved_hyper(vocab_size);
  tinylm::ModelConfig m = hetero_base;
  m.arch = tinylm::ArchKind::kDecoderOnly;
  m.n_enc_layers = 0;
  m.vocab_size = vocab_size;
  m.patch_width = task.patch_width;
  return m;
}

void RunConfig::validate() const {
  task.validate();
  resolved_hyper(tinylm::Vocabulary::kReserved + 1).validate();
  resolved_base(tinylm::Vocabulary::kReserved + 1).validate();
  if (pretrain.steps <= pretrain.warmup_steps || pretrain.batch_size == 0) {
    throw std::invalid_argument(
        "pretrain: need batch_size > 0 and steps > warmup_steps");
  }
  if (racc.l_d == 0 || racc.l_vq == 0 || racc.n_heads == 0) {
    throw std::invalid_argument("racc: l_d, l_vq and n_heads must be positive");
  }
  if (hyper_model.d_model % racc.n_heads != 0) {
    throw std::invalid_argument("racc.n_heads must divide the hyper d_model");
  }
  train.validate();
  if (max_answer_len == 0) {
    throw std::invalid_argument("max_answer_len must be positive");
  }
  if (bench_instances < 100) {
    throw std::invalid_argument("bench_instances must be at least 100");
  }
  if (out.empty()) throw std::invalid_argument("out directory is empty");
}

json RunConfig::to_json() const {
  const auto& t = task;
  const auto& s = train.schedule;
  return {
      {"variant", variant_name(variant)},
      {"out", out.string()},
      {"model_seed", model_seed},
      {"max_answer_len", max_answer_len},
      {"bench_instances", bench_instances},
      {"task",
       {{"seed", t.seed},
        {"n_entities", t.n_entities},
        {"n_attributes", t.n_attributes},
        {"n_instances", t.n_instances},
        {"val_fraction", t.val_fraction},
        {"distractor_rate", t.distractor_rate},
        {"annotations", t.annotations},
        {"annotation_noise", t.annotation_noise},
        {"num_patches", t.num_patches},
        {"patch_width", t.patch_width},
        {"filler_sentences", t.filler_sentences},
        {"multimodal_corpus", t.multimodal_corpus}}},
      {"hyper_model", model_json(hyper_model)},
      {"hetero_base", model_json(hetero_base)},
      {"pretrain",
       {{"steps", pretrain.steps},
        {"batch_size", pretrain.batch_size},
        {"warmup_steps", pretrain.warmup_steps},
        {"lr_peak", pretrain.lr_peak},
        {"lr_floor", pretrain.lr_floor},
        {"lm_weight", pretrain.lm_weight},
        {"seed", pretrain.seed}}},
      {"racc",
       {{"l_d", racc.l_d},
        {"l_vq", racc.l_vq},
        {"n_r", racc.n_r},
        {"n_heads", racc.n_heads},
        {"mlp_hidden", racc.mlp_hidden},
        {"seed", racc.seed},
        {"toggles",
         {{"pipe", racc.toggles.pipe},
          {"prdb", racc.toggles.prdb},
          {"dcse", racc.toggles.dcse},
          {"rgca", racc.toggles.rgca}}}}},
      {"train",
       {{"k", train.k},
        {"batch_size", train.batch_size},
        {"seed", train.seed},
        {"warmup_steps", s.warmup_steps},
        {"total_steps", s.total_steps},
        {"lr_peak", s.lr_peak},
        {"lr_floor", s.lr_floor},
        {"weight_decay", train.adamw.weight_decay}}},
  };
}

void RunConfig::merge_json(const json& j) {
  Reader top(j, "");
  std::string variant_text = variant_name(variant);
  std::string out_text = out.string();
  top.field("variant", variant_text)
      .field("out", out_text)
      .field("model_seed", model_seed)
      .field("max_answer_len", max_answer_len)
      .field("bench_instances", bench_instances);
  variant = parse_variant(variant_text);
  out = out_text;
  if (const json* t = top.child("task")) {
    Reader(*t, "task")
        .field("seed", task.seed)
        .field("n_entities", task.n_entities)
        .field("n_attributes", task.n_attributes)
        .field("n_instances", task.n_instances)
        .field("val_fraction", task.val_fraction)
        .field("distractor_rate", task.distractor_rate)
        .field("annotations", task.annotations)
        .field("annotation_noise", task.annotation_noise)
        .field("num_patches", task.num_patches)
        .field("patch_width", task.patch_width)
        .field("filler_sentences", task.filler_sentences)
        .field("multimodal_corpus", task.multimodal_corpus)
        .finish();
  }
  if (const json* m = top.child("hyper_model")) read_model(*m, "hyper_model", hyper_model);
  if (const json* m = top.child("hetero_base")) read_model(*m, "hetero_base", hetero_base);
  if (const json* p = top.child("pretrain")) {
    Reader(*p, "pretrain")
        .field("steps", pretrain.steps)
        .field("batch_size", pretrain.batch_size)
        .field("warmup_steps", pretrain.warmup_steps)
        .field("lr_peak", pretrain.lr_peak)
        .field("lr_floor", pretrain.lr_floor)
        .field("lm_weight", pretrain.lm_weight)
        .field("seed", pretrain.seed)
        .finish();
  }
  if (const json* r = top.child("racc")) {
    Reader rr(*r, "racc");
    rr.field("l_d", racc.l_d)
        .field("l_vq", racc.l_vq)
        .field("n_r", racc.n_r)
        .field("n_heads", racc.n_heads)
        .field("mlp_hidden", racc.mlp_hidden)
        .field("seed", racc.seed);
    if (const json* tg = rr.child("toggles")) {
      Reader(*tg, "racc.toggles")
          .field("pipe", racc.toggles.pipe)
          .field("prdb", racc.toggles.prdb)
          .field("dcse", racc.toggles.dcse)
          .field("rgca", racc.toggles.rgca)
          .finish();
    }
    rr.finish();
  }
  if (const json* t = top.child("train")) {
    Reader(*t, "train")
        .field("k", train.k)
        .field("batch_size", train.batch_size)
        .field("seed", train.seed)
        .field("warmup_steps", train.schedule.warmup_steps)
        .field("total_steps", train.schedule.total_steps)
        .field("lr_peak", train.schedule.lr_peak)
        .field("lr_floor", train.schedule.lr_floor)
        .field("weight_decay", train.adamw.weight_decay)
        .finish();
  }
  top.finish();
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  cfg.merge_json(j);
  return cfg;
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out_file(path);
  if (!out_file) throw std::runtime_error("cannot write " + path.string());
  out_file << to_json().dump(2) << '\n';
}

}  // namespace racc::app
