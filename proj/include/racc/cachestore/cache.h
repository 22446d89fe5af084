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

// Pre-saved compressed document prompts.
//
// Layout (little-endian):
//   "RCC1" | u64 hyper checksum | u64 theta_d checksum | u32 L_d | u32 d
//   | u32 count | count x (u32 id length, id bytes, u64 offset)
//   | count x (L_d x d float64, row-major)
// Offsets are absolute file positions.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "racc/compressor/compressor.h"

namespace racc::cachestore {

using compressor::Compressor;
using compressor::PromptBank;
using retrieval::Document;

/// The cache was built against different hyper weights or theta_d.
class StaleCacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PromptNotFoundError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline constexpr std::size_t kCacheHeaderBytes = 4 + 8 + 8 + 4 + 4 + 4;

struct CacheSummary {
  std::size_t count = 0;
  std::uint64_t file_bytes = 0;
};

/// Compresses every document with the current theta_d and writes the file.
CacheSummary build_cache(const std::vector<Document>& corpus,
                         const Compressor& compressor,
                         const std::filesystem::path& path);

/// Read-only view of a cache file. The file is read once at open and
/// validated against the live hyper model and theta_d.
class PromptCache {
 public:
  static PromptCache open(const std::filesystem::path& path,
                          const tinylm::TinyLM& hyper, const PromptBank& bank);

  /// Exact stored matrix, L_d x d.
  Tensor load_prompt(const std::string& doc_id) const;
  bool contains(const std::string& doc_id) const {
    return index_.count(doc_id) != 0;
  }
  std::size_t size() const { return index_.size(); }
  std::size_t l_d() const { return l_d_; }
  std::size_t width() const { return width_; }
  std::uint64_t file_bytes() const { return bytes_.size(); }

 private:
  PromptCache() = default;

  std::vector<char> bytes_;
  std::unordered_map<std::string, std::uint64_t> index_;
  std::size_t l_d_ = 0;
  std::size_t width_ = 0;
};

struct DiskReport {
  std::uint64_t raw_bytes = 0;    // document text plus any image grids
  std::uint64_t cache_bytes = 0;  // index plus packed prompts
  std::optional<double> ratio;    // cache / raw; empty when raw is 0

  std::string ratio_text() const;
};

/// Byte accounting for a built cache against its corpus. Raw bytes count
/// each document's text and 8 bytes per image value.
DiskReport disk_report(const std::filesystem::path& cache_path,
                       const std::vector<Document>& corpus,
                       const tinylm::Vocabulary& vocab);

}  // namespace racc::cachestore
