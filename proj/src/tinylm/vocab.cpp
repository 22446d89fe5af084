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

#include "racc/tinylm/vocab.h"

namespace racc::tinylm {

namespace {

constexpr const char* kReservedNames[Vocabulary::kReserved] = {
    "<pad>", "<bos>", "<eos>", "<img>", "<sep>", "<r5>", "<r6>", "<r7>"};

bool is_punct(char c) { return c == '.' || c == ',' || c == '?'; }

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  for (const char* name : kReservedNames) tokens_.emplace_back(name);
  for (const std::string& w : words) {
    if (w.empty() || w.find(' ') != std::string::npos) {
      throw std::invalid_argument("vocabulary word must be non-empty and "
                                  "contain no spaces: '" + w + "'");
    }
    tokens_.push_back(w);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary word '" + tokens_[i] +
                                  "'");
    }
  }
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) {
    throw OutOfVocabularyError("word '" + std::string(word) +
                               "' is not in the vocabulary");
  }
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) +
                            " outside vocabulary of " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
  std::vector<int> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j == i) break;
    std::string_view word = text.substr(i, j - i);
    // Trailing punctuation becomes its own token unless the whole word is
    // a vocabulary entry.
    std::size_t end = word.size();
    while (end > 0 && is_punct(word[end - 1]) && !contains(word.substr(0, end))) {
      --end;
    }
    if (end > 0) ids.push_back(id(word.substr(0, end)));
    for (std::size_t k = end; k < word.size(); ++k) {
      ids.push_back(id(word.substr(k, 1)));
    }
    i = j;
  }
  return ids;
}

std::string Vocabulary::detokenize(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    const std::string& tok = token(id);
    const bool attach = tok.size() == 1 && is_punct(tok[0]);
    if (!out.empty() && !attach) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace racc::tinylm
