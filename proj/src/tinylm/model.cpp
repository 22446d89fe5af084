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

#include "racc/tinylm/model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "racc/tinylm/vocab.h"

namespace racc::tinylm {

static_assert(std::endian::native == std::endian::little,
              "snapshot formats assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'L', 'M', '1'};

void write_u32(std::ostream& os, std::uint64_t v) {
  const auto x = static_cast<std::uint32_t>(v);
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  if (!is) throw std::runtime_error("model snapshot truncated in config record");
  return x;
}

}  // namespace

const char* arch_name(ArchKind kind) {
  return kind == ArchKind::kEncoderDecoder ? "encoder-decoder" : "decoder-only";
}

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("d_model " + std::to_string(d_model) +
                                " must be divisible by n_heads " +
                                std::to_string(n_heads));
  }
  if (prefix_layers() < 1 || n_dec_layers < 1) {
    throw std::invalid_argument("model needs at least one decoder layer");
  }
  if (arch == ArchKind::kDecoderOnly && n_enc_layers != 0) {
    throw std::invalid_argument("decoder-only model must have n_enc_layers == 0");
  }
  if (arch == ArchKind::kEncoderDecoder && n_enc_layers == 0) {
    throw std::invalid_argument("encoder-decoder model needs encoder layers");
  }
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kReserved) ||
      d_ff == 0 || patch_width == 0) {
    throw std::invalid_argument("vocab_size, d_ff and patch_width must be set");
  }
}

TinyLM::TinyLM(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d_model;
  embedding_ = Parameter{"embedding", Tensor::randn(config_.vocab_size, d, 1.0, rng)};
  image_proj_ = Parameter{
      "image_proj",
      Tensor::randn(config_.patch_width, d,
                    1.0 / std::sqrt(static_cast<double>(config_.patch_width)), rng)};

  auto make_block = [&](const std::string& name) {
    return Block{nn::LayerNorm::create(name + ".ln_attn", d),
                 nn::AttentionWeights::create(name + ".attn", d, rng),
                 nn::LayerNorm::create(name + ".ln_ff", d),
                 nn::FeedForward::create(name + ".ff", d, config_.d_ff, rng)};
  };
  if (is_encoder_decoder()) {
    for (std::size_t l = 0; l < config_.n_enc_layers; ++l) {
      enc_.push_back(make_block("enc." + std::to_string(l)));
    }
    enc_norm_ = nn::LayerNorm::create("enc.norm", d);
    for (std::size_t l = 0; l < config_.n_dec_layers; ++l) {
      const std::string name = "dec." + std::to_string(l);
      dec_.push_back(DecoderBlock{
          nn::LayerNorm::create(name + ".ln_self", d),
          nn::AttentionWeights::create(name + ".self", d, rng),
          nn::LayerNorm::create(name + ".ln_cross", d),
          nn::AttentionWeights::create(name + ".cross", d, rng),
          nn::LayerNorm::create(name + ".ln_ff", d),
          nn::FeedForward::create(name + ".ff", d, config_.d_ff, rng)});
    }
  } else {
    for (std::size_t l = 0; l < config_.n_dec_layers; ++l) {
      causal_.push_back(make_block("dec." + std::to_string(l)));
    }
  }
  dec_norm_ = nn::LayerNorm::create("dec.norm", d);
}

template <typename Self, typename Out>
void TinyLM::collect_params(Self& self, Out& out) {
  out.push_back(&self.embedding_);
  out.push_back(&self.image_proj_);
  for (auto& b : self.enc_) {
    b.ln_attn.collect(out);
    b.attn.collect(out);
    b.ln_ff.collect(out);
    b.ff.collect(out);
  }
  if (self.is_encoder_decoder()) self.enc_norm_.collect(out);
  for (auto& b : self.causal_) {
    b.ln_attn.collect(out);
    b.attn.collect(out);
    b.ln_ff.collect(out);
    b.ff.collect(out);
  }
  for (auto& b : self.dec_) {
    b.ln_self.collect(out);
    b.self_attn.collect(out);
    b.ln_cross.collect(out);
    b.cross_attn.collect(out);
    b.ln_ff.collect(out);
    b.ff.collect(out);
  }
  self.dec_norm_.collect(out);
}

std::vector<Parameter*> TinyLM::parameters() {
  std::vector<Parameter*> out;
  collect_params(*this, out);
  return out;
}

std::vector<const Parameter*> TinyLM::parameters() const {
  std::vector<const Parameter*> out;
  collect_params(*this, out);
  return out;
}

void TinyLM::set_trainable(bool trainable) {
  for (Parameter* p : parameters()) p->trainable = trainable;
}

std::uint64_t TinyLM::checksum() const {
  const auto params = parameters();
  return racc::checksum(params);
}

Var TinyLM::embed_tokens(Graph& g, std::span<const int> ids) const {
  return embedding_lookup(g.param(embedding_), ids);
}

Var TinyLM::embed_image(Graph& g, const SyntheticImage& image) const {
  if (image.patches.is_null() || image.patch_width() != config_.patch_width) {
    throw ShapeError("embed_image: patch width " +
                     (image.patches.is_null()
                          ? std::string("<empty>")
                          : std::to_string(image.patch_width())) +
                     ", model expects " + std::to_string(config_.patch_width));
  }
  return matmul(g.constant(image.patches), g.param(image_proj_));
}

void TinyLM::check_prefix(const PrefixKV* prefix) const {
  if (prefix == nullptr) return;
  if (prefix->layers() != config_.prefix_layers() ||
      prefix->values.size() != prefix->keys.size()) {
    throw ShapeError("prefix has " + std::to_string(prefix->layers()) +
                     " layers, model has m = " +
                     std::to_string(config_.prefix_layers()));
  }
}

Var TinyLM::run_blocks(Graph& g, const std::vector<Block>& blocks, Var x,
                       bool causal, const PrefixKV* prefix,
                       std::size_t prefix_offset, AttentionTrace* trace) const {
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const Block& b = blocks[l];
    nn::AttentionOptions opts;
    opts.causal = causal;
    opts.trace = trace;
    if (prefix != nullptr) {
      opts.prefix_keys = &prefix->keys[prefix_offset + l];
      opts.prefix_values = &prefix->values[prefix_offset + l];
    }
    Var h = b.ln_attn(g, x);
    x = add(x, nn::multi_head_attention(g, b.attn, h, h, config_.n_heads, opts));
    x = add(x, b.ff(g, b.ln_ff(g, x)));
  }
  return x;
}

Var TinyLM::encode(Graph& g, const Var& inputs, const PrefixKV* prefix,
                   AttentionTrace* trace) const {
  if (!is_encoder_decoder()) {
    throw std::logic_error("encode() on a decoder-only model");
  }
  if (!inputs.valid() || inputs.value().is_null()) {
    throw ShapeError("encode: empty input sequence");
  }
  if (inputs.cols() != config_.d_model) {
    throw ShapeError("encode: input width " + std::to_string(inputs.cols()) +
                     ", model width " + std::to_string(config_.d_model));
  }
  check_prefix(prefix);
  Var x = add(inputs, g.constant(nn::sinusoidal_positions(
                          inputs.rows(), config_.d_model)));
  x = run_blocks(g, enc_, x, /*causal=*/false, prefix, 0, trace);
  return enc_norm_(g, x);
}

Var TinyLM::decode(Graph& g, const Var& inputs, const Var& encoder_states,
                   const PrefixKV* prefix, AttentionTrace* trace) const {
  if (!is_encoder_decoder()) {
    throw std::logic_error("decode() on a decoder-only model");
  }
  if (inputs.cols() != config_.d_model ||
      encoder_states.cols() != config_.d_model) {
    throw ShapeError("decode: width mismatch, inputs " +
                     std::to_string(inputs.cols()) + ", encoder states " +
                     std::to_string(encoder_states.cols()) + ", model " +
                     std::to_string(config_.d_model));
  }
  check_prefix(prefix);
  Var x = add(inputs, g.constant(nn::sinusoidal_positions(
                          inputs.rows(), config_.d_model)));
  for (std::size_t l = 0; l < dec_.size(); ++l) {
    const DecoderBlock& b = dec_[l];
    nn::AttentionOptions self_opts;
    self_opts.causal = true;
    self_opts.trace = trace;
    if (prefix != nullptr) {
      self_opts.prefix_keys = &prefix->keys[config_.n_enc_layers + l];
      self_opts.prefix_values = &prefix->values[config_.n_enc_layers + l];
    }
    Var h = b.ln_self(g, x);
    x = add(x, nn::multi_head_attention(g, b.self_attn, h, h, config_.n_heads,
                                        self_opts));
    nn::AttentionOptions cross_opts;
    cross_opts.trace = trace;
    x = add(x, nn::multi_head_attention(g, b.cross_attn, b.ln_cross(g, x),
                                        encoder_states, config_.n_heads,
                                        cross_opts));
    x = add(x, b.ff(g, b.ln_ff(g, x)));
  }
  return dec_norm_(g, x);
}

Var TinyLM::decode_only(Graph& g, const Var& inputs, const PrefixKV* prefix,
                        AttentionTrace* trace) const {
  if (is_encoder_decoder()) {
    throw std::logic_error("decode_only() on an encoder-decoder model");
  }
  if (inputs.cols() != config_.d_model) {
    throw ShapeError("decode_only: input width " +
                     std::to_string(inputs.cols()) + ", model width " +
                     std::to_string(config_.d_model));
  }
  check_prefix(prefix);
  Var x = add(inputs, g.constant(nn::sinusoidal_positions(
                          inputs.rows(), config_.d_model)));
  x = run_blocks(g, causal_, x, /*causal=*/true, prefix, 0, trace);
  return dec_norm_(g, x);
}

Var TinyLM::logits(Graph& g, const Var& hidden) const {
  const double s = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
  return scale(matmul(hidden, transpose(g.param(embedding_))), s);
}

void TinyLM::write(std::ostream& os) const {
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, static_cast<std::uint32_t>(config_.arch));
  write_u32(os, config_.d_model);
  write_u32(os, config_.n_heads);
  write_u32(os, config_.n_enc_layers);
  write_u32(os, config_.n_dec_layers);
  write_u32(os, config_.d_ff);
  write_u32(os, config_.vocab_size);
  write_u32(os, config_.patch_width);
  for (const Parameter* p : parameters()) {
    const auto bytes = std::as_bytes(p->value.data());
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  }
}

TinyLM TinyLM::read(std::istream& is) {
  char magic[4] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a TLM1 model snapshot");
  }
  ModelConfig cfg;
  cfg.arch = static_cast<ArchKind>(read_u32(is));
  cfg.d_model = read_u32(is);
  cfg.n_heads = read_u32(is);
  cfg.n_enc_layers = read_u32(is);
  cfg.n_dec_layers = read_u32(is);
  cfg.d_ff = read_u32(is);
  cfg.vocab_size = read_u32(is);
  cfg.patch_width = read_u32(is);
  TinyLM model(cfg, 0);
  for (Parameter* p : model.parameters()) {
    auto bytes = std::as_writable_bytes(p->value.mutable_data());
    is.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!is) {
      throw std::runtime_error("model snapshot truncated at parameter '" +
                               p->name + "'");
    }
  }
  return model;
}

void TinyLM::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write(os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

TinyLM TinyLM::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read(is);
}

std::string TinyLM::serialize() const {
  std::ostringstream os(std::ios::binary);
  write(os);
  return os.str();
}

Var base_forward(Graph& g, const TinyLM& model, const Var& context,
                 std::span<const int> decoder_ids, const PrefixKV* prefix,
                 AttentionTrace* trace) {
  if (decoder_ids.empty()) {
    throw std::invalid_argument("base_forward: decoder ids must start with <bos>");
  }
  Var dec_in = model.embed_tokens(g, decoder_ids);
  if (model.is_encoder_decoder()) {
    Var enc = model.encode(g, context, prefix, trace);
    return model.logits(g, model.decode(g, dec_in, enc, prefix, trace));
  }
  Var seq = concat({context, dec_in}, 0);
  Var hidden = model.decode_only(g, seq, prefix, trace);
  const std::size_t n = decoder_ids.size();
  return model.logits(g, slice_rows(hidden, hidden.rows() - n, hidden.rows()));
}

Var build_context(Graph& g, const TinyLM& model, const SyntheticImage& image,
                  std::span<const int> question,
                  std::span<const int> document) {
  std::vector<Var> parts;
  if (!document.empty()) parts.push_back(model.embed_tokens(g, document));
  parts.push_back(model.embed_image(g, image));
  if (!question.empty()) parts.push_back(model.embed_tokens(g, question));
  return parts.size() == 1 ? parts.front() : concat(parts, 0);
}

std::vector<int> generate(Graph& g, const TinyLM& model, const Var& context,
                          const PrefixKV* prefix, std::size_t max_len) {
  std::vector<int> tokens{Vocabulary::kBos};
  std::vector<int> out;
  std::optional<Var> enc;
  if (model.is_encoder_decoder()) enc = model.encode(g, context, prefix);
  for (std::size_t step = 0; step < max_len; ++step) {
    Var dec_in = model.embed_tokens(g, tokens);
    Var last;
    if (enc) {
      Var hidden = model.decode(g, dec_in, *enc, prefix);
      last = slice_rows(hidden, hidden.rows() - 1, hidden.rows());
    } else {
      Var hidden = model.decode_only(g, concat({context, dec_in}, 0), prefix);
      last = slice_rows(hidden, hidden.rows() - 1, hidden.rows());
    }
    const Tensor& row = model.logits(g, last).value();
    const auto data = row.data();
    const int next = static_cast<int>(
        std::max_element(data.begin(), data.end()) - data.begin());
    if (next == Vocabulary::kEos) break;
    out.push_back(next);
    tokens.push_back(next);
  }
  return out;
}

std::vector<int> generate(const TinyLM& model, const SyntheticImage& image,
                          std::span<const int> question, const PrefixKV* prefix,
                          std::size_t max_len) {
  if (prefix != nullptr) {
    // The prefix lives in its own graph; generation must extend that graph.
    Graph& g = prefix->keys.front().graph();
    return generate(g, model, build_context(g, model, image, question), prefix,
                    max_len);
  }
  Graph g;
  return generate(g, model, build_context(g, model, image, question), nullptr,
                  max_len);
}

}  // namespace racc::tinylm
