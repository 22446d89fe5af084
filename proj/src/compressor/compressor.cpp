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

#include "racc/compressor/compressor.h"

#include <cstring>
#include <memory>
#include <stdexcept>

namespace racc::compressor {

namespace {

void append_bytes(std::string& key, const void* data, std::size_t n) {
  key.append(static_cast<const char*>(data), n);
}

void check_width(const Tensor& t, std::size_t width, const char* what) {
  if (t.cols() != width) {
    throw ShapeError(std::string(what) + " width " + std::to_string(t.cols()) +
                     " does not match hyper model width " +
                     std::to_string(width));
  }
}

}  // namespace

const char* source_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::kDocument: return "document";
    case SourceKind::kJointVQ: return "joint_vq";
    case SourceKind::kVision: return "vision";
    case SourceKind::kQuestion: return "question";
  }
  return "unknown";
}

std::uint64_t PromptBank::theta_d_checksum() const {
  const Parameter* p = &theta_d;
  return checksum(std::span<const Parameter* const>(&p, 1));
}

Tensor hard_prompt_rows(const std::string& hard_prompt, const Vocabulary& vocab,
                        const Tensor& embedding_table, std::size_t length) {
  const std::vector<int> ids = vocab.tokenize(hard_prompt);
  if (ids.empty()) throw std::invalid_argument("PIPE: empty hard prompt");
  if (length == 0) throw std::invalid_argument("PIPE: prompt length must be positive");
  const std::size_t d = embedding_table.cols();
  Tensor out({length, d});
  for (std::size_t r = 0; r < length; ++r) {
    const auto id = static_cast<std::size_t>(ids[r % ids.size()]);
    for (std::size_t c = 0; c < d; ++c) out(r, c) = embedding_table(id, c);
  }
  return out;
}

PromptBank pipe_init(const std::string& hard_prompt_d,
                     const std::string& hard_prompt_vq, const Vocabulary& vocab,
                     const Tensor& embedding_table, std::size_t l_d,
                     std::size_t l_vq) {
  return PromptBank{
      Parameter{"theta_d",
                hard_prompt_rows(hard_prompt_d, vocab, embedding_table, l_d)},
      Parameter{"theta_vq",
                hard_prompt_rows(hard_prompt_vq, vocab, embedding_table, l_vq)}};
}

PromptBank random_init(std::size_t l_d, std::size_t l_vq, std::size_t width,
                       double stddev, std::mt19937_64& rng) {
  if (l_d == 0 || l_vq == 0) {
    throw std::invalid_argument("prompt lengths must be positive");
  }
  PromptBank bank;
  bank.theta_d = Parameter{"theta_d", Tensor::randn(l_d, width, stddev, rng)};
  bank.theta_vq = Parameter{"theta_vq", Tensor::randn(l_vq, width, stddev, rng)};
  return bank;
}

Compressor::Compressor(const TinyLM& hyper, const PromptBank& bank)
    : hyper_(&hyper), bank_(&bank) {
  if (!hyper.is_encoder_decoder()) {
    throw std::invalid_argument("the hyper model must be an encoder-decoder");
  }
  check_width(bank.theta_d.value, hyper.config().d_model, "theta_d");
  check_width(bank.theta_vq.value, hyper.config().d_model, "theta_vq");
}

Var Compressor::hyper_encode(Graph& g, const Var& inputs) const {
  return hyper_->encode(g, inputs);
}

Var Compressor::hyper_decode(Graph& g, const Var& encoder_states,
                             const Var& prompts) const {
  if (prompts.rows() == 0) throw ShapeError("hyper_decode: no prompts");
  check_width(prompts.value(), hyper_->config().d_model, "prompt");
  return hyper_->decode(g, prompts, encoder_states);
}

Var Compressor::encode_cached(Graph& g, const std::string& key,
                              const std::function<Var()>& build) const {
  if (!memoize_) return build();
  auto it = memo_.find(key);
  if (it != memo_.end()) return g.constant(it->second);
  Var out = build();
  memo_.emplace(key, out.value());
  return out;
}

Var Compressor::encode_tokens(Graph& g, std::span<const int> tokens,
                              const std::string& tag) const {
  std::string key = tag;
  append_bytes(key, tokens.data(), tokens.size_bytes());
  return encode_cached(g, key, [&] {
    return hyper_encode(g, hyper_->embed_tokens(g, tokens));
  });
}

Var Compressor::encode_image_question(Graph& g, const SyntheticImage* image,
                                      std::span<const int> question) const {
  std::string key = image ? "iq|" : "q|";
  if (image != nullptr) {
    const auto data = image->patches.data();
    append_bytes(key, data.data(), data.size_bytes());
    key += '|';
  }
  append_bytes(key, question.data(), question.size_bytes());
  return encode_cached(g, key, [&] {
    std::vector<Var> parts;
    if (image != nullptr) parts.push_back(hyper_->embed_image(g, *image));
    if (!question.empty()) parts.push_back(hyper_->embed_tokens(g, question));
    Var seq = parts.size() == 1 ? parts.front() : concat(parts, 0);
    return hyper_encode(g, seq);
  });
}

CompressedPrompt Compressor::compress_document(Graph& g,
                                               const Document& doc) const {
  if (doc.tokens.empty()) {
    throw std::invalid_argument("compress_document: document '" + doc.id +
                                "' is empty");
  }
  Var enc = encode_tokens(g, doc.tokens, "d|");
  Var rows = hyper_decode(g, enc, g.param(bank_->theta_d));
  return CompressedPrompt{rows, SourceKind::kDocument, doc.id};
}

CompressedPrompt Compressor::compress_joint(Graph& g,
                                            const SyntheticImage& image,
                                            std::span<const int> question) const {
  if (question.empty()) {
    throw std::invalid_argument("compress_joint: empty question");
  }
  Var enc = encode_image_question(g, &image, question);
  Var rows = hyper_decode(g, enc, g.param(bank_->theta_vq));
  return CompressedPrompt{rows, SourceKind::kJointVQ, {}};
}

CompressedPrompt Compressor::compress_decoupled(
    Graph& g, const SyntheticImage* image,
    const std::vector<int>* question) const {
  if ((image == nullptr) == (question == nullptr)) {
    throw std::invalid_argument(
        "compress_decoupled: supply exactly one of image or question");
  }
  if (question != nullptr && question->empty()) {
    throw std::invalid_argument("compress_decoupled: empty question");
  }
  Var enc = image != nullptr
                ? encode_image_question(g, image, {})
                : encode_tokens(g, *question, "qo|");
  Var rows = hyper_decode(g, enc, g.param(bank_->theta_vq));
  return CompressedPrompt{
      rows, image != nullptr ? SourceKind::kVision : SourceKind::kQuestion, {}};
}

std::vector<CompressedPrompt> prdb_gate(std::span<const CompressedPrompt> prompts,
                                        std::span<const bool> relevant) {
  if (prompts.size() != relevant.size()) {
    throw std::invalid_argument("prdb_gate: " + std::to_string(prompts.size()) +
                                " prompts but " +
                                std::to_string(relevant.size()) + " flags");
  }
  std::vector<CompressedPrompt> out(prompts.begin(), prompts.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!relevant[i]) out[i].rows = stop_gradient(out[i].rows);
  }
  return out;
}

std::vector<CompressedPrompt> prdb_gate(std::span<const CompressedPrompt> prompts,
                                        const std::vector<bool>& relevant) {
  std::unique_ptr<bool[]> flags(new bool[relevant.size()]);
  for (std::size_t i = 0; i < relevant.size(); ++i) flags[i] = relevant[i];
  return prdb_gate(prompts, std::span<const bool>(flags.get(), relevant.size()));
}

}  // namespace racc::compressor
