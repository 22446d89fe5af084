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

// Compression learning: learnable prompts fed through the frozen hyper
// model's decoder turn a document or an image-question pair into a
// fixed-length matrix of soft prompts.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "racc/numerics/graph.h"
#include "racc/retrieval/task.h"
#include "racc/tinylm/model.h"
#include "racc/tinylm/vocab.h"

namespace racc::compressor {

using retrieval::Document;
using tinylm::SyntheticImage;
using tinylm::TinyLM;
using tinylm::Vocabulary;

enum class SourceKind { kDocument, kJointVQ, kVision, kQuestion };

const char* source_name(SourceKind kind);

struct CompressedPrompt {
  Var rows;  // L x d_hyper
  SourceKind kind = SourceKind::kDocument;
  std::string source_id;

  std::size_t length() const { return rows.rows(); }
};

/// The two trainable prompt matrices.
struct PromptBank {
  Parameter theta_d;   // L_d x d_hyper
  Parameter theta_vq;  // L_vq x d_hyper

  std::size_t l_d() const { return theta_d.value.rows(); }
  std::size_t l_vq() const { return theta_vq.value.rows(); }
  std::size_t width() const { return theta_d.value.cols(); }
  std::uint64_t theta_d_checksum() const;
  std::vector<Parameter*> parameters() { return {&theta_d, &theta_vq}; }
  std::vector<const Parameter*> parameters() const {
    return {&theta_d, &theta_vq};
  }
};

/// Rows [0, length) of `embedding_table` gathered at the hard prompt's
/// token ids, truncated or cycled to `length` rows.
Tensor hard_prompt_rows(const std::string& hard_prompt, const Vocabulary& vocab,
                        const Tensor& embedding_table, std::size_t length);

/// PIPE: both matrices start from hard-prompt token embeddings.
PromptBank pipe_init(const std::string& hard_prompt_d,
                     const std::string& hard_prompt_vq, const Vocabulary& vocab,
                     const Tensor& embedding_table, std::size_t l_d,
                     std::size_t l_vq);

/// Gaussian initialization with the embedding table's scale (PIPE off).
PromptBank random_init(std::size_t l_d, std::size_t l_vq, std::size_t width,
                       double stddev, std::mt19937_64& rng);

/// Runs the hyper model. Encoder outputs do not depend on any trainable
/// value, so they can be memoized across graphs.
class Compressor {
 public:
  Compressor(const TinyLM& hyper, const PromptBank& bank);

  /// Hidden states of the frozen encoder over an input embedding sequence.
  Var hyper_encode(Graph& g, const Var& inputs) const;
  /// Decoder pass with `prompts` as decoder inputs; L x d_hyper.
  Var hyper_decode(Graph& g, const Var& encoder_states,
                   const Var& prompts) const;

  CompressedPrompt compress_document(Graph& g, const Document& doc) const;
  CompressedPrompt compress_joint(Graph& g, const SyntheticImage& image,
                                  std::span<const int> question) const;
  /// Exactly one of `image` / `question` must be given.
  CompressedPrompt compress_decoupled(Graph& g, const SyntheticImage* image,
                                      const std::vector<int>* question) const;

  void set_memoize(bool on) { memoize_ = on; }
  void clear_memo() { memo_.clear(); }
  const TinyLM& hyper() const { return *hyper_; }
  const PromptBank& bank() const { return *bank_; }

 private:
  Var encode_cached(Graph& g, const std::string& key,
                    const std::function<Var()>& build) const;
  Var encode_tokens(Graph& g, std::span<const int> tokens,
                    const std::string& tag) const;
  Var encode_image_question(Graph& g, const SyntheticImage* image,
                            std::span<const int> question) const;

  const TinyLM* hyper_;
  const PromptBank* bank_;
  bool memoize_ = false;
  mutable std::unordered_map<std::string, Tensor> memo_;
};

/// PRDB: prompts whose flag is false are cut from backpropagation. Forward
/// values are untouched.
std::vector<CompressedPrompt> prdb_gate(std::span<const CompressedPrompt> prompts,
                                        std::span<const bool> relevant);
std::vector<CompressedPrompt> prdb_gate(std::span<const CompressedPrompt> prompts,
                                        const std::vector<bool>& relevant);

}  // namespace racc::compressor
