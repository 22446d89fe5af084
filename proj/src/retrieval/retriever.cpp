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

#include "racc/retrieval/retriever.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace racc::retrieval {

namespace {

// Cosine of -1 would map to a zero score; the gate needs strictly positive.
constexpr double kMinScore = 1e-12;

void normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

Retriever::Retriever(const World& world, RetrieverOptions options)
    : world_(&world), options_(options) {
  const std::size_t vocab = world.vocab().size();
  std::mt19937_64 rng(options_.seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  token_vectors_.resize(vocab * options_.dim);
  for (double& x : token_vectors_) x = dist(rng);
  if (options_.orthogonal) {
    if (options_.dim < vocab) {
      throw std::invalid_argument("retriever: orthogonal token vectors need dim >= " +
                                  std::to_string(vocab));
    }
    // Modified Gram-Schmidt over the token rows.
    const std::size_t d = options_.dim;
    for (std::size_t i = 0; i < vocab; ++i) {
      double* vi = token_vectors_.data() + i * d;
      for (std::size_t j = 0; j < i; ++j) {
        const double* vj = token_vectors_.data() + j * d;
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += vi[c] * vj[c];
        for (std::size_t c = 0; c < d; ++c) vi[c] -= dot * vj[c];
      }
      double n = 0.0;
      for (std::size_t c = 0; c < d; ++c) n += vi[c] * vi[c];
      n = std::sqrt(n);
      for (std::size_t c = 0; c < d; ++c) vi[c] /= n;
    }
  }
}

void Retriever::add_scaled(std::vector<double>& acc, int token, double w) const {
  const double* v = token_vectors_.data() +
                    static_cast<std::size_t>(token) * options_.dim;
  for (std::size_t i = 0; i < options_.dim; ++i) acc[i] += w * v[i];
}

std::vector<double> Retriever::embed_text(std::span<const int> tokens) const {
  std::vector<double> acc(options_.dim, 0.0);
  if (!options_.binary_tf) {
    for (int t : tokens) add_scaled(acc, t, 1.0);
    return acc;
  }
  std::vector<int> distinct(tokens.begin(), tokens.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (int t : distinct) add_scaled(acc, t, 1.0);
  return acc;
}

std::size_t Retriever::recognize(const SyntheticImage& image) const {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < world_->n_entities(); ++e) {
    const Tensor& code = world_->entity_image(e).patches;
    if (code.shape() != image.patches.shape()) {
      throw ShapeError("retriever: image grid " +
                       shape_to_string(image.patches.shape()) +
                       " does not match entity codes " +
                       shape_to_string(code.shape()));
    }
    double d = 0.0;
    auto a = code.data();
    auto b = image.patches.data();
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    if (d < best_dist) {
      best_dist = d;
      best = e;
    }
  }
  return best;
}

void Retriever::index(const std::vector<Document>& corpus) {
  corpus_ = &corpus;
  doc_ids_.clear();
  doc_vectors_.assign(corpus.size() * options_.dim, 0.0);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& d = corpus[i];
    std::vector<double> v = embed_text(d.tokens);
    if (d.image) {
      const int ent = world_->vocab().id(world_->entity_word(recognize(*d.image)));
      add_scaled(v, ent, options_.image_weight);
    }
    normalize(v);
    std::copy(v.begin(), v.end(),
              doc_vectors_.begin() + static_cast<long>(i * options_.dim));
    doc_ids_.push_back(d.id);
  }
}

RetrievedSet Retriever::retrieve(const SyntheticImage* image,
                                 std::span<const int> question,
                                 std::size_t k) const {
  if (k == 0) throw std::invalid_argument("retrieve: K must be positive");
  if (k > doc_ids_.size()) {
    throw std::invalid_argument("retrieve: K = " + std::to_string(k) +
                                " exceeds corpus size " +
                                std::to_string(doc_ids_.size()));
  }
  std::vector<double> q = embed_text(question);
  if (image != nullptr) {
    const int ent = world_->vocab().id(world_->entity_word(recognize(*image)));
    add_scaled(q, ent, options_.image_weight);
  }
  normalize(q);

  std::vector<double> cos(doc_ids_.size());
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    const double* v = doc_vectors_.data() + i * options_.dim;
    double s = 0.0;
    for (std::size_t j = 0; j < options_.dim; ++j) s += q[j] * v[j];
    cos[i] = s;
  }
  std::vector<std::size_t> order(doc_ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (cos[a] != cos[b]) return cos[a] > cos[b];
                      return doc_ids_[a] < doc_ids_[b];
                    });
  RetrievedSet out;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    out.doc_indices.push_back(i);
    out.doc_ids.push_back(doc_ids_[i]);
    out.scores.push_back(std::clamp((1.0 + cos[i]) / 2.0, kMinScore, 1.0));
  }
  return out;
}

RetrievedSet Retriever::retrieve(const VQAInstance& instance,
                                 std::size_t k) const {
  RetrievedSet out = retrieve(&instance.image, instance.question, k);
  for (std::size_t i : out.doc_indices) {
    out.pseudo_relevant.push_back(
        label_pseudo_relevance((*corpus_)[i], instance.answers, world_->vocab()));
  }
  return out;
}

double prrecall_at_k(std::span<const RetrievedSet> sets, std::size_t k) {
  if (sets.empty()) throw std::invalid_argument("prrecall_at_k: no instances");
  std::size_t hits = 0;
  for (const RetrievedSet& s : sets) {
    if (s.pseudo_relevant.size() != s.size()) {
      throw std::invalid_argument("prrecall_at_k: retrieved set lacks relevance flags");
    }
    const std::size_t n = k == 0 ? s.size() : std::min(k, s.size());
    if (std::any_of(s.pseudo_relevant.begin(),
                    s.pseudo_relevant.begin() + static_cast<long>(n),
                    [](bool b) { return b; })) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(sets.size());
}

}  // namespace racc::retrieval
