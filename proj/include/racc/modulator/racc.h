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

// The full RACC pipeline around a frozen hyper model and a frozen base
// model: compression, aggregation, modulation, then prefix-steered
// answering.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "racc/aggregator/aggregator.h"
#include "racc/cachestore/cache.h"
#include "racc/compressor/compressor.h"
#include "racc/modulator/modulation.h"
#include "racc/retrieval/retriever.h"

namespace racc::modulator {

struct Toggles {
  bool pipe = true;
  bool prdb = true;
  bool dcse = true;
  bool rgca = true;

  std::string label() const;
  friend bool operator==(const Toggles&, const Toggles&) = default;
};

struct RaccConfig {
  std::size_t l_d = 16;
  std::size_t l_vq = 12;
  std::size_t n_r = 3;
  std::size_t n_heads = 4;
  /// MLP hidden width; 0 means 2 * d_hyper.
  std::size_t mlp_hidden = 0;
  Toggles toggles;
  std::uint64_t seed = 7;
};

/// Trainable state ({theta_d, theta_vq, h}) bound to two frozen models.
class RaccModel {
 public:
  RaccModel(const tinylm::TinyLM& hyper, const tinylm::TinyLM& base,
            const tinylm::Vocabulary& vocab, const RaccConfig& config);
  RaccModel(const RaccModel&) = delete;
  RaccModel& operator=(const RaccModel&) = delete;

  const RaccConfig& config() const { return config_; }
  const tinylm::TinyLM& hyper() const { return *hyper_; }
  const tinylm::TinyLM& base() const { return *base_; }
  const compressor::PromptBank& bank() const { return bank_; }
  const aggregator::CrossAttentionBlock& dcse() const { return dcse_; }
  const aggregator::RGCAStack& rgca() const { return rgca_; }
  const MLPSet& mlps() const { return mlps_; }
  const compressor::Compressor& compressor() const { return compressor_; }
  compressor::Compressor& compressor() { return compressor_; }

  /// theta_d, theta_vq, CA block, RGCA blocks, MLPs, in that order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  void write(std::ostream& os) const;
  /// Overwrites parameters from a snapshot taken with the same shapes.
  void read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  RaccConfig config_;
  const tinylm::TinyLM* hyper_;
  const tinylm::TinyLM* base_;
  compressor::PromptBank bank_;
  aggregator::CrossAttentionBlock dcse_;
  aggregator::RGCAStack rgca_;
  MLPSet mlps_;
  compressor::Compressor compressor_;
};

/// One question with its retrieved documents.
struct RaccQuery {
  const tinylm::SyntheticImage* image = nullptr;
  std::span<const int> question;
  std::vector<const retrieval::Document*> docs;
  std::vector<double> scores;
  std::vector<bool> relevant;  // used by PRDB during training
};

RaccQuery make_query(const retrieval::VQAInstance& instance,
                     const retrieval::RetrievedSet& retrieved,
                     const std::vector<retrieval::Document>& corpus);

/// Compression through modulation. `training` enables the PRDB gate (when
/// toggled on). With `cache`, document prompts are loaded instead of
/// computed.
PrefixKV build_modulation(Graph& g, const RaccModel& model,
                          const RaccQuery& query, bool training,
                          const cachestore::PromptCache* cache = nullptr);

/// Teacher-forced base-model logits under the modulation.
Var racc_logits(Graph& g, const RaccModel& model, const RaccQuery& query,
                std::span<const int> decoder_ids, bool training,
                const cachestore::PromptCache* cache = nullptr);

/// Greedy answer tokens.
std::vector<int> racc_answer(const RaccModel& model, const RaccQuery& query,
                             std::size_t max_len,
                             const cachestore::PromptCache* cache = nullptr);

}  // namespace racc::modulator
