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
#include <span>
#include <string>
#include <vector>

#include "racc/retrieval/task.h"

namespace racc::retrieval {

/// Top-K documents for one query, best first.
struct RetrievedSet {
  std::vector<std::size_t> doc_indices;  // positions in the indexed corpus
  std::vector<std::string> doc_ids;
  std::vector<double> scores;            // (1 + cos) / 2, descending, in (0, 1]
  std::vector<bool> pseudo_relevant;     // empty when no answers were given

  std::size_t size() const { return doc_ids.size(); }
};

struct RetrieverOptions {
  std::size_t dim = 512;
  std::uint64_t seed = 0x5EED;
  /// Weight of the image's entity vector relative to one text token.
  double image_weight = 3.0;
  /// Count each distinct token once per text.
  bool binary_tf = true;
  /// Orthonormalize the random token vectors (requires dim >= vocab size).
  bool orthogonal = true;
};

/// Frozen dual-encoder stand-in. Text is a bag of fixed random token
/// vectors; an image is mapped to the vector of the entity whose code it
/// matches (the "vision tower" is a nearest-code lookup over the world's
/// entity images). Scores are cosine similarities mapped into (0, 1].
class Retriever {
 public:
  Retriever(const World& world, RetrieverOptions options = {});

  void index(const std::vector<Document>& corpus);
  std::size_t corpus_size() const { return doc_ids_.size(); }

  /// Exhaustive scan. Ties are broken by document id ascending.
  RetrievedSet retrieve(const SyntheticImage* image,
                        std::span<const int> question, std::size_t k) const;
  /// Same, plus pseudo-relevance flags against the instance's answers.
  RetrievedSet retrieve(const VQAInstance& instance, std::size_t k) const;

  std::vector<double> embed_text(std::span<const int> tokens) const;
  /// Entity index whose image code is nearest to `image`.
  std::size_t recognize(const SyntheticImage& image) const;

 private:
  void add_scaled(std::vector<double>& acc, int token, double w) const;

  const World* world_;
  RetrieverOptions options_;
  std::vector<double> token_vectors_;  // vocab x dim
  std::vector<std::string> doc_ids_;
  std::vector<double> doc_vectors_;    // normalized, corpus x dim
  const std::vector<Document>* corpus_ = nullptr;
};

/// Fraction of instances whose first k retrieved documents contain at
/// least one pseudo-relevant one. k = 0 means the full set.
double prrecall_at_k(std::span<const RetrievedSet> sets, std::size_t k = 0);

}  // namespace racc::retrieval
