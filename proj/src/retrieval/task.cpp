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

#include "racc/retrieval/task.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace racc::retrieval {

namespace {

struct AttributeDef {
  const char* name;
  std::vector<std::string> values;
};

const std::vector<AttributeDef>& attribute_table() {
  static const std::vector<AttributeDef> table = {
      {"color", {"red", "blue", "green", "yellow", "purple", "orange", "white", "black"}},
      {"shape", {"round", "square", "flat", "long", "curved", "pointed", "hollow", "twisted"}},
      {"size", {"tiny", "small", "medium", "large", "huge", "giant", "narrow", "wide"}},
      {"material", {"wood", "metal", "glass", "stone", "cloth", "paper", "clay", "plastic"}},
      {"origin", {"north", "south", "east", "west", "coast", "mountain", "desert", "island"}},
      {"habitat", {"forest", "river", "cave", "field", "swamp", "jungle", "tundra", "reef"}},
      {"sound", {"loud", "quiet", "shrill", "deep", "humming", "ringing", "silent", "buzzing"}},
      {"taste", {"sweet", "sour", "bitter", "salty", "spicy", "bland", "savory", "tangy"}},
  };
  return table;
}

const std::vector<std::string>& places() {
  static const std::vector<std::string> p = {
      "hill", "lake", "road", "bridge", "market", "tower", "garden", "harbor",
      "village", "station", "temple", "castle", "farm", "school", "museum", "library"};
  return p;
}

const std::vector<std::string>& plain_words() {
  static const std::vector<std::string> w = {
      // templates
      "the", "of", "is", "what", "object", "in", "image", "name", "was",
      "seen", "near", "people", "often", "talk", "about", "appears", "many",
      "old", "stories", "visitors", "remember", "from", "nobody", "wrote",
      "down", "this", "record", "well", "known", "passage", "and", "a",
      "it", "usually", "next", "to", "found", "children", "like", "draw",
      // hard prompts
      "Summarize", "key", "information", "given", "concise", "manner",
      "question",
      // punctuation
      ".", "?", ","};
  return w;
}

const std::string kDocPrompt =
    "Summarize the key information of the given passage in a concise manner.";
const std::string kVqPrompt =
    "Summarize the image and the question in a concise manner.";

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ULL ^ (b + 0x632BE59BD9B4E019ULL);
  x ^= x >> 31;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 29;
  return x;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

std::size_t uniform(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(rng);
}

bool bernoulli(double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng) < p;
}

// Synthetic text is emitted in detokenized form: punctuation attaches to
// the preceding word.
std::string canonical(std::string s) {
  for (const char* from : {" .", " ?", " ,"}) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) s.erase(pos, 1);
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void TaskConfig::validate() const {
  if (n_entities == 0 || n_attributes == 0 || n_instances == 0 ||
      annotations == 0 || num_patches == 0 || patch_width == 0) {
    throw std::invalid_argument("task sizes must be positive");
  }
  if (n_attributes > attribute_table().size()) {
    throw std::invalid_argument("at most " +
                                std::to_string(attribute_table().size()) +
                                " attributes are available");
  }
  if (n_instances > n_entities * n_attributes) {
    throw std::invalid_argument(
        "unsatisfiable task: " + std::to_string(n_instances) +
        " instances need distinct (entity, attribute) pairs but only " +
        std::to_string(n_entities * n_attributes) + " exist");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie in (0, 1)");
  }
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_instances) * val_fraction));
  if (n_val == 0 || n_val >= n_instances) {
    throw std::invalid_argument("split leaves train or val empty");
  }
  if (!(distractor_rate >= 0.0 && distractor_rate < 1.0)) {
    throw std::invalid_argument("distractor_rate must lie in [0, 1)");
  }
  if (!(annotation_noise >= 0.0 && annotation_noise <= 1.0)) {
    throw std::invalid_argument("annotation_noise must lie in [0, 1]");
  }
}

const std::string& VQAInstance::gold_answer() const {
  if (answers.empty()) throw std::logic_error("instance " + id + " has no answers");
  std::map<std::string, std::size_t> counts;
  for (const auto& a : answers) ++counts[a];
  const std::string* best = &answers.front();
  for (const auto& a : answers) {
    if (counts[a] > counts[*best]) best = &a;
  }
  return *best;
}

World::World(const TaskConfig& config) : config_(config) {
  config_.validate();
  std::vector<std::string> words;
  for (std::size_t e = 0; e < config_.n_entities; ++e) {
    entities_.push_back("ent_" + std::to_string(e));
  }
  words.insert(words.end(), entities_.begin(), entities_.end());
  // Every attribute word and value is always in the vocabulary so that
  // vocabularies agree across task sizes.
  for (const auto& attr : attribute_table()) {
    words.emplace_back(attr.name);
    words.insert(words.end(), attr.values.begin(), attr.values.end());
  }
  words.insert(words.end(), places().begin(), places().end());
  words.insert(words.end(), plain_words().begin(), plain_words().end());
  vocab_ = Vocabulary(words);

  std::mt19937_64 rng(mix(config_.seed, 0xFAC7));
  facts_.assign(config_.n_entities, std::vector<std::size_t>(config_.n_attributes));
  for (auto& row : facts_) {
    for (std::size_t a = 0; a < config_.n_attributes; ++a) {
      row[a] = uniform(attribute_table()[a].values.size(), rng);
    }
  }
  for (std::size_t e = 0; e < config_.n_entities; ++e) {
    std::mt19937_64 img_rng(mix(config_.seed, 0x1000 + e));
    images_.push_back(SyntheticImage{
        Tensor::randn(config_.num_patches, config_.patch_width, 1.0, img_rng)});
  }
}

const std::string& World::attribute_word(std::size_t a) const {
  static std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& attr : attribute_table()) n.emplace_back(attr.name);
    return n;
  }();
  return names.at(a);
}

const std::vector<std::string>& World::attribute_values(std::size_t a) const {
  return attribute_table().at(a).values;
}

const std::string& World::fact(std::size_t e, std::size_t a) const {
  return attribute_values(a)[facts_.at(e).at(a)];
}

const std::string& World::doc_hard_prompt() { return kDocPrompt; }
const std::string& World::vq_hard_prompt() { return kVqPrompt; }

std::string World::question_text(std::size_t a) const {
  return canonical("what is the " + attribute_word(a) +
                   " of the object in the image ?");
}

std::string World::naming_question_text() const {
  return canonical("what is the name of the object in the image ?");
}

std::string World::filler(std::size_t e, std::mt19937_64& rng) const {
  const std::string& ent = entities_[e];
  const std::string& place = pick(places(), rng);
  switch (uniform(6, rng)) {
    case 0: return ent + " was seen near the " + place + " .";
    case 1: return "people often talk about " + ent + " .";
    case 2: return ent + " appears in many old stories .";
    case 3: return "many visitors remember " + ent + " from the " + place + " .";
    case 4: return "it is usually found next to the " + place + " .";
    default: return "children like to draw " + ent + " .";
  }
}

std::string World::fact_sentence(std::size_t e, std::size_t a,
                                 const std::string& value) const {
  return canonical("the " + attribute_word(a) + " of " + entities_[e] + " is " +
                   value + " .");
}

std::string World::fact_text(std::size_t e, std::size_t a,
                             const std::string& value,
                             std::mt19937_64& rng) const {
  std::vector<std::string> sentences;
  for (std::size_t i = 0; i < config_.filler_sentences; ++i) {
    sentences.push_back(filler(e, rng));
  }
  sentences.insert(sentences.begin() +
                       static_cast<long>(uniform(sentences.size() + 1, rng)),
                   fact_sentence(e, a, value));
  std::string out;
  for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
  return canonical(out);
}

std::string World::distractor_lead(std::size_t e, std::mt19937_64& rng) const {
  const std::string& ent = entities_[e];
  switch (uniform(3, rng)) {
    case 0:
      return canonical("nobody wrote down the " +
                       attribute_word(uniform(config_.n_attributes, rng)) +
                       " of " + ent + " in this record .");
    case 1: return canonical(ent + " is a well known object .");
    default:
      return canonical("this passage is about " + ent + " and the " +
                       pick(places(), rng) + " .");
  }
}

std::string World::distractor_text(std::size_t e, std::mt19937_64& rng) const {
  std::string out = distractor_lead(e, rng);
  for (std::size_t i = 0; i < config_.filler_sentences; ++i) {
    out += " " + filler(e, rng);
  }
  return canonical(out);
}

Task World::generate() const {
  Task task;
  task.config = config_;
  std::mt19937_64 rng(mix(config_.seed, 0xC0FFEE));

  struct Draft {
    std::size_t entity;
    std::string text;
  };
  std::vector<Draft> drafts;
  for (std::size_t e = 0; e < config_.n_entities; ++e) {
    for (std::size_t a = 0; a < config_.n_attributes; ++a) {
      drafts.push_back({e, fact_text(e, a, fact(e, a), rng)});
    }
  }
  const std::size_t n_facts = drafts.size();
  const auto n_distract = static_cast<std::size_t>(std::llround(
      static_cast<double>(n_facts) * config_.distractor_rate /
      (1.0 - config_.distractor_rate)));
  for (std::size_t i = 0; i < n_distract; ++i) {
    const std::size_t e = uniform(config_.n_entities, rng);
    drafts.push_back({e, distractor_text(e, rng)});
  }
  std::shuffle(drafts.begin(), drafts.end(), rng);
  char buf[32];
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "d%05zu", i);
    Document doc{buf, vocab_.tokenize(drafts[i].text), std::nullopt};
    if (config_.multimodal_corpus) doc.image = images_[drafts[i].entity];
    task.corpus.push_back(std::move(doc));
  }

  std::vector<std::size_t> pairs(config_.n_entities * config_.n_attributes);
  std::iota(pairs.begin(), pairs.end(), std::size_t{0});
  std::shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(config_.n_instances);
  const auto n_val = static_cast<std::size_t>(std::llround(
      static_cast<double>(config_.n_instances) * config_.val_fraction));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t e = pairs[i] / config_.n_attributes;
    const std::size_t a = pairs[i] % config_.n_attributes;
    VQAInstance inst;
    std::snprintf(buf, sizeof(buf), "q%05zu", i);
    inst.id = buf;
    inst.image = images_[e];
    inst.question = vocab_.tokenize(question_text(a));
    const std::string& gold = fact(e, a);
    const auto& values = attribute_values(a);
    for (std::size_t k = 0; k < config_.annotations; ++k) {
      if (bernoulli(config_.annotation_noise, rng)) {
        std::string other = gold;
        while (other == gold) other = pick(values, rng);
        inst.answers.push_back(other);
      } else {
        inst.answers.push_back(gold);
      }
    }
    (i < n_val ? task.val : task.train).push_back(std::move(inst));
  }
  return task;
}

PretrainExample World::sample_pretrain(std::mt19937_64& rng,
                                       bool allow_summary) const {
  PretrainExample ex;
  const std::size_t e = uniform(config_.n_entities, rng);
  ex.image = images_[e];
  if (allow_summary && bernoulli(0.2, rng)) {
    ex.kind = PretrainKind::kSummary;
    if (bernoulli(0.3, rng)) {
      std::string lead = distractor_lead(e, rng);
      std::string doc = lead;
      for (std::size_t i = 0; i < config_.filler_sentences; ++i) {
        doc += " " + filler(e, rng);
      }
      ex.document = vocab_.tokenize(doc);
      ex.answer = vocab_.tokenize(lead);
    } else {
      const std::size_t a = uniform(config_.n_attributes, rng);
      const std::string& value = pick(attribute_values(a), rng);
      ex.document = vocab_.tokenize(fact_text(e, a, value, rng));
      ex.answer = vocab_.tokenize(fact_sentence(e, a, value));
    }
    return ex;
  }
  if (bernoulli(0.15, rng)) {
    ex.kind = PretrainKind::kNaming;
    ex.question = vocab_.tokenize(naming_question_text());
    ex.answer = {vocab_.id(entities_[e])};
    return ex;
  }
  const std::size_t a = uniform(config_.n_attributes, rng);
  const std::string& value = pick(attribute_values(a), rng);
  ex.question = vocab_.tokenize(question_text(a));
  ex.answer = vocab_.tokenize(value);
  std::string doc = fact_text(e, a, value, rng);
  if (config_.n_attributes > 1 && bernoulli(0.5, rng)) {
    std::size_t other = a;
    while (other == a) other = uniform(config_.n_attributes, rng);
    const std::string extra =
        fact_text(e, other, pick(attribute_values(other), rng), rng);
    doc = bernoulli(0.5, rng) ? doc + " " + extra : extra + " " + doc;
  }
  ex.document = vocab_.tokenize(doc);
  return ex;
}

Task generate_task(const TaskConfig& config) { return World(config).generate(); }

std::string encode_patches(const SyntheticImage& image) {
  std::string out = std::to_string(image.num_patches()) + "x" +
                    std::to_string(image.patch_width()) + ":";
  char buf[40];
  const auto data = image.patches.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
    if (i) out.push_back(',');
    out += buf;
  }
  return out;
}

SyntheticImage decode_patches(const std::string& text) {
  const auto colon = text.find(':');
  const auto x = text.find('x');
  if (colon == std::string::npos || x == std::string::npos || x > colon) {
    throw std::runtime_error("malformed patch grid '" + text.substr(0, 32) + "'");
  }
  const std::size_t rows = std::stoul(text.substr(0, x));
  const std::size_t cols = std::stoul(text.substr(x + 1, colon - x - 1));
  std::vector<double> data;
  for (const auto& field : split(text.substr(colon + 1), ',')) {
    data.push_back(std::stod(field));
  }
  return SyntheticImage{Tensor({rows, cols}, std::move(data))};
}

void write_corpus(const std::filesystem::path& path,
                  const std::vector<Document>& corpus, const Vocabulary& vocab) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const Document& d : corpus) {
    os << d.id << '\t' << vocab.detokenize(d.tokens);
    if (d.image) os << '\t' << encode_patches(*d.image);
    os << '\n';
  }
}

std::vector<Document> read_corpus(const std::filesystem::path& path,
                                  const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<Document> out;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw std::runtime_error("corpus line has " +
                               std::to_string(fields.size()) + " fields");
    }
    Document d{fields[0], vocab.tokenize(fields[1]), std::nullopt};
    if (d.tokens.empty()) throw std::runtime_error("empty document " + d.id);
    if (!seen.insert(d.id).second) {
      throw std::runtime_error("duplicate document id " + d.id);
    }
    if (fields.size() == 3) d.image = decode_patches(fields[2]);
    out.push_back(std::move(d));
  }
  return out;
}

void write_instances(const std::filesystem::path& path,
                     const std::vector<VQAInstance>& instances,
                     const Vocabulary& vocab) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const VQAInstance& inst : instances) {
    os << inst.id << '\t' << encode_patches(inst.image) << '\t'
       << vocab.detokenize(inst.question) << '\t'
       << nlohmann::json(inst.answers).dump() << '\n';
  }
}

std::vector<VQAInstance> read_instances(const std::filesystem::path& path,
                                        const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<VQAInstance> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw std::runtime_error("instance line has " +
                               std::to_string(fields.size()) + " fields");
    }
    VQAInstance inst;
    inst.id = fields[0];
    inst.image = decode_patches(fields[1]);
    inst.question = vocab.tokenize(fields[2]);
    inst.answers = nlohmann::json::parse(fields[3]).get<std::vector<std::string>>();
    if (inst.answers.empty()) {
      throw std::runtime_error("instance " + inst.id + " has no answers");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

bool label_pseudo_relevance(const Document& doc,
                            const std::vector<std::string>& answers,
                            const Vocabulary& vocab) {
  for (const std::string& answer : answers) {
    std::vector<int> needle;
    try {
      needle = vocab.tokenize(answer);
    } catch (const tinylm::OutOfVocabularyError&) {
      continue;
    }
    if (needle.empty()) continue;
    if (std::search(doc.tokens.begin(), doc.tokens.end(), needle.begin(),
                    needle.end()) != doc.tokens.end()) {
      return true;
    }
  }
  return false;
}

}  // namespace racc::retrieval
