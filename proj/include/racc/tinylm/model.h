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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "racc/numerics/graph.h"
#include "racc/numerics/nn.h"

namespace racc::tinylm {

enum class ArchKind : std::uint32_t { kEncoderDecoder = 0, kDecoderOnly = 1 };

const char* arch_name(ArchKind kind);

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_enc_layers = 2;
  std::size_t n_dec_layers = 2;
  std::size_t d_ff = 128;
  std::size_t vocab_size = 0;
  std::size_t patch_width = 8;
  ArchKind arch = ArchKind::kEncoderDecoder;

  /// Number of self-attention layers that accept a key/value prefix:
  /// encoder plus decoder layers. This is the "m" of the modulation.
  std::size_t prefix_layers() const { return n_enc_layers + n_dec_layers; }
  std::size_t d_head() const { return d_model / n_heads; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Symbolic image: P patch vectors of fixed width.
struct SyntheticImage {
  Tensor patches;  // P x patch_width

  std::size_t num_patches() const { return patches.rows(); }
  std::size_t patch_width() const { return patches.cols(); }
};

/// Per-layer key/value rows prepended to self-attention. keys[l] and
/// values[l] are L_mod x d_model with heads as contiguous column blocks.
struct PrefixKV {
  std::vector<Var> keys;
  std::vector<Var> values;

  std::size_t layers() const { return keys.size(); }
  std::size_t length() const { return keys.empty() ? 0 : keys.front().rows(); }
};

using AttentionTrace = std::vector<Tensor>;

/// Toy transformer. Encoder-decoder models use bidirectional encoder
/// blocks and causal decoder blocks with cross-attention; decoder-only
/// models have causal blocks and n_enc_layers == 0. Pre-norm throughout,
/// output projection tied to the token embedding.
class TinyLM {
 public:
  TinyLM(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  bool is_encoder_decoder() const {
    return config_.arch == ArchKind::kEncoderDecoder;
  }

  /// Parameters in declaration (serialization) order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void set_trainable(bool trainable);
  std::uint64_t checksum() const;
  const Tensor& embedding_table() const { return embedding_.value; }

  Var embed_tokens(Graph& g, std::span<const int> ids) const;
  /// Frozen linear projection of patch vectors to P x d_model.
  Var embed_image(Graph& g, const SyntheticImage& image) const;

  /// Encoder stack over an input embedding sequence (positions added here).
  Var encode(Graph& g, const Var& inputs, const PrefixKV* prefix = nullptr,
             AttentionTrace* trace = nullptr) const;
  /// Causal decoder stack with cross-attention over encoder states.
  Var decode(Graph& g, const Var& inputs, const Var& encoder_states,
             const PrefixKV* prefix = nullptr,
             AttentionTrace* trace = nullptr) const;
  /// Causal stack of a decoder-only model.
  Var decode_only(Graph& g, const Var& inputs, const PrefixKV* prefix = nullptr,
                  AttentionTrace* trace = nullptr) const;
  Var logits(Graph& g, const Var& hidden) const;

  void write(std::ostream& os) const;
  static TinyLM read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static TinyLM load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  struct Block {
    nn::LayerNorm ln_attn;
    nn::AttentionWeights attn;
    nn::LayerNorm ln_ff;
    nn::FeedForward ff;
  };
  struct DecoderBlock {
    nn::LayerNorm ln_self;
    nn::AttentionWeights self_attn;
    nn::LayerNorm ln_cross;
    nn::AttentionWeights cross_attn;
    nn::LayerNorm ln_ff;
    nn::FeedForward ff;
  };

  template <typename Self, typename Out>
  static void collect_params(Self& self, Out& out);

  Var run_blocks(Graph& g, const std::vector<Block>& blocks, Var x,
                 bool causal, const PrefixKV* prefix,
                 std::size_t prefix_offset, AttentionTrace* trace) const;
  void check_prefix(const PrefixKV* prefix) const;

  ModelConfig config_;
  Parameter embedding_;    // vocab x d
  Parameter image_proj_;   // patch_width x d
  std::vector<Block> enc_;
  nn::LayerNorm enc_norm_;
  std::vector<Block> causal_;          // decoder-only
  std::vector<DecoderBlock> dec_;      // encoder-decoder
  nn::LayerNorm dec_norm_;
};

/// Logits for the decoder positions given a context and decoder tokens.
///
/// `context` is the encoder-side input embedding sequence (image patches,
/// question tokens, and optionally in-context documents). For
/// encoder-decoder models it is encoded and `decoder_ids` (starting with
/// <bos>) are decoded against it; for decoder-only models the two are
/// concatenated into one causal sequence. The result has one row per
/// decoder id. Prefix layer l feeds self-attention layer l in execution
/// order (encoder first).
Var base_forward(Graph& g, const TinyLM& model, const Var& context,
                 std::span<const int> decoder_ids,
                 const PrefixKV* prefix = nullptr,
                 AttentionTrace* trace = nullptr);

/// Context for the base model: [document tokens ; image patches ; question].
/// `document` may be empty.
Var build_context(Graph& g, const TinyLM& model, const SyntheticImage& image,
                  std::span<const int> question,
                  std::span<const int> document = {});

/// Greedy decoding from <bos>. Stops at <eos> (not included) or after
/// max_len tokens.
std::vector<int> generate(Graph& g, const TinyLM& model, const Var& context,
                          const PrefixKV* prefix, std::size_t max_len);
std::vector<int> generate(const TinyLM& model, const SyntheticImage& image,
                          std::span<const int> question, const PrefixKV* prefix,
                          std::size_t max_len);

}  // namespace racc::tinylm
