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

// Synthetic knowledge-based VQA world.
//
// Entities carry one value per attribute. Images encode an entity as a
// fixed grid of patch vectors. Fact documents state one (entity, attribute,
// value) triple inside filler sentences; distractor documents reuse the
// same vocabulary without stating any value. A question asks for one
// attribute of the pictured entity, so the answer lives only in the corpus.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "racc/tinylm/model.h"
#include "racc/tinylm/vocab.h"

namespace racc::retrieval {

using tinylm::SyntheticImage;
using tinylm::Vocabulary;

struct TaskConfig {
  std::uint64_t seed = 7;
  std::size_t n_entities = 128;
  std::size_t n_attributes = 6;
  std::size_t n_instances = 600;
  double val_fraction = 0.25;
  double distractor_rate = 0.8;
  std::size_t annotations = 5;
  double annotation_noise = 0.1;
  std::size_t num_patches = 16;
  std::size_t patch_width = 8;
  std::size_t filler_sentences = 2;
  bool multimodal_corpus = false;

  void validate() const;
};

struct Document {
  std::string id;
  std::vector<int> tokens;
  std::optional<SyntheticImage> image;
};

struct VQAInstance {
  std::string id;
  SyntheticImage image;
  std::vector<int> question;
  std::vector<std::string> answers;  // annotator answers, gold repeated

  /// Most frequent annotation (first on ties); the training target.
  const std::string& gold_answer() const;
};

struct Task {
  TaskConfig config;
  std::vector<Document> corpus;
  std::vector<VQAInstance> train;
  std::vector<VQAInstance> val;
};

enum class PretrainKind {
  kQA,        // image + question + document -> value
  kNaming,    // image + naming question -> entity word
  kSummary,   // document alone -> its key sentence
};

/// One Stage-0 example. Values are re-sampled per example so they can only
/// be read from `document`.
struct PretrainExample {
  PretrainKind kind = PretrainKind::kQA;
  SyntheticImage image;       // unused for summaries
  std::vector<int> question;  // empty for summaries
  std::vector<int> document;  // empty for naming questions
  std::vector<int> answer;
};

/// Words, templates and entity images of a synthetic world. Everything is
/// a deterministic function of the config.
class World {
 public:
  explicit World(const TaskConfig& config);

  const TaskConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t n_entities() const { return config_.n_entities; }
  std::size_t n_attributes() const { return config_.n_attributes; }

  const std::string& entity_word(std::size_t e) const { return entities_[e]; }
  const std::string& attribute_word(std::size_t a) const;
  const std::vector<std::string>& attribute_values(std::size_t a) const;
  /// Fixed value of (entity, attribute) in this world.
  const std::string& fact(std::size_t e, std::size_t a) const;
  const SyntheticImage& entity_image(std::size_t e) const { return images_[e]; }

  std::string question_text(std::size_t a) const;
  std::string naming_question_text() const;
  std::string fact_text(std::size_t e, std::size_t a, const std::string& value,
                        std::mt19937_64& rng) const;
  std::string distractor_text(std::size_t e, std::mt19937_64& rng) const;
  /// The sentence carrying a fact document's information.
  std::string fact_sentence(std::size_t e, std::size_t a,
                            const std::string& value) const;

  Task generate() const;
  PretrainExample sample_pretrain(std::mt19937_64& rng,
                                  bool allow_summary = true) const;

  static const std::string& doc_hard_prompt();
  static const std::string& vq_hard_prompt();

 private:
  std::string filler(std::size_t e, std::mt19937_64& rng) const;
  std::string distractor_lead(std::size_t e, std::mt19937_64& rng) const;

  TaskConfig config_;
  std::vector<std::string> entities_;
  std::vector<std::vector<std::size_t>> facts_;  // [entity][attribute] value index
  std::vector<SyntheticImage> images_;
  Vocabulary vocab_;
};

Task generate_task(const TaskConfig& config);

// Corpus file: id \t text \t [patches]. Instance file: id \t patches \t
// question \t answers-json. Patches are "PxW:" followed by comma-separated
// %.17g values.
void write_corpus(const std::filesystem::path& path,
                  const std::vector<Document>& corpus, const Vocabulary& vocab);
std::vector<Document> read_corpus(const std::filesystem::path& path,
                                  const Vocabulary& vocab);
void write_instances(const std::filesystem::path& path,
                     const std::vector<VQAInstance>& instances,
                     const Vocabulary& vocab);
std::vector<VQAInstance> read_instances(const std::filesystem::path& path,
                                        const Vocabulary& vocab);

std::string encode_patches(const SyntheticImage& image);
SyntheticImage decode_patches(const std::string& text);

/// True iff any annotation's token sequence occurs contiguously in `doc`.
bool label_pseudo_relevance(const Document& doc,
                            const std::vector<std::string>& answers,
                            const Vocabulary& vocab);

}  // namespace racc::retrieval
