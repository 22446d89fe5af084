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

#include "racc/cachestore/cache.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace racc::cachestore {

static_assert(std::endian::native == std::endian::little,
              "cache files are little-endian");

namespace {

constexpr char kMagic[4] = {'R', 'C', 'C', '1'};

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(const std::vector<char>& bytes, std::size_t& pos, const char* what) {
  if (pos + sizeof(T) > bytes.size()) {
    throw std::runtime_error(std::string("cache file truncated reading ") + what);
  }
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

CacheSummary build_cache(const std::vector<Document>& corpus,
                         const Compressor& compressor,
                         const std::filesystem::path& path) {
  const PromptBank& bank = compressor.bank();
  const std::size_t l_d = bank.l_d();
  const std::size_t d = bank.width();

  std::string header;
  header.append(kMagic, sizeof(kMagic));
  put<std::uint64_t>(header, compressor.hyper().checksum());
  put<std::uint64_t>(header, bank.theta_d_checksum());
  put<std::uint32_t>(header, static_cast<std::uint32_t>(l_d));
  put<std::uint32_t>(header, static_cast<std::uint32_t>(d));
  put<std::uint32_t>(header, static_cast<std::uint32_t>(corpus.size()));

  std::size_t index_bytes = 0;
  for (const Document& doc : corpus) index_bytes += 4 + doc.id.size() + 8;
  const std::uint64_t payload_start = header.size() + index_bytes;
  const std::uint64_t matrix_bytes = l_d * d * sizeof(double);

  std::string index;
  std::string payload;
  payload.reserve(corpus.size() * matrix_bytes);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& doc = corpus[i];
    put<std::uint32_t>(index, static_cast<std::uint32_t>(doc.id.size()));
    index += doc.id;
    put<std::uint64_t>(index, payload_start + i * matrix_bytes);
    Graph g;
    const Tensor prompt = compressor.compress_document(g, doc).rows.value();
    const auto data = prompt.data();
    payload.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write cache file " + path.string());
  os << header << index << payload;
  os.close();
  if (!os) throw std::runtime_error("failed writing cache file " + path.string());
  return CacheSummary{corpus.size(),
                      header.size() + index.size() + payload.size()};
}

PromptCache PromptCache::open(const std::filesystem::path& path,
                              const tinylm::TinyLM& hyper,
                              const PromptBank& bank) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open cache file " + path.string() +
                             "; build it with `racc train --pre-save`");
  }
  PromptCache cache;
  cache.bytes_.assign(std::istreambuf_iterator<char>(is),
                      std::istreambuf_iterator<char>());
  const auto& b = cache.bytes_;
  if (b.size() < kCacheHeaderBytes || std::memcmp(b.data(), kMagic, 4) != 0) {
    throw std::runtime_error(path.string() + " is not an RCC1 cache file");
  }
  std::size_t pos = 4;
  const auto hyper_sum = get<std::uint64_t>(b, pos, "hyper checksum");
  const auto theta_sum = get<std::uint64_t>(b, pos, "theta_d checksum");
  if (hyper_sum != hyper.checksum() || theta_sum != bank.theta_d_checksum()) {
    throw StaleCacheError(
        "stale prompt cache " + path.string() + ": built for hyper " +
        hex(hyper_sum) + " / theta_d " + hex(theta_sum) + ", live models are " +
        hex(hyper.checksum()) + " / " + hex(bank.theta_d_checksum()) +
        "; rebuild it with `racc train --pre-save`");
  }
  cache.l_d_ = get<std::uint32_t>(b, pos, "L_d");
  cache.width_ = get<std::uint32_t>(b, pos, "width");
  if (cache.l_d_ != bank.l_d() || cache.width_ != bank.width()) {
    throw StaleCacheError("prompt cache shape does not match theta_d");
  }
  const auto count = get<std::uint32_t>(b, pos, "count");
  const std::uint64_t matrix_bytes = cache.l_d_ * cache.width_ * sizeof(double);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(b, pos, "id length");
    if (pos + len > b.size()) throw std::runtime_error("cache index truncated");
    std::string id(b.data() + pos, len);
    pos += len;
    const auto offset = get<std::uint64_t>(b, pos, "offset");
    if (offset + matrix_bytes > b.size()) {
      throw std::runtime_error("cache entry " + id + " points past end of file");
    }
    cache.index_.emplace(std::move(id), offset);
  }
  return cache;
}

Tensor PromptCache::load_prompt(const std::string& doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) {
    throw PromptNotFoundError("document '" + doc_id + "' is not in the prompt cache");
  }
  std::vector<double> data(l_d_ * width_);
  std::memcpy(data.data(), bytes_.data() + it->second,
              data.size() * sizeof(double));
  return Tensor({l_d_, width_}, std::move(data));
}

std::string DiskReport::ratio_text() const {
  if (!ratio) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *ratio);
  return buf;
}

DiskReport disk_report(const std::filesystem::path& cache_path,
                       const std::vector<Document>& corpus,
                       const tinylm::Vocabulary& vocab) {
  DiskReport r;
  for (const Document& d : corpus) {
    r.raw_bytes += vocab.detokenize(d.tokens).size();
    if (d.image) r.raw_bytes += d.image->patches.numel() * sizeof(double);
  }
  const std::uint64_t file = std::filesystem::file_size(cache_path);
  r.cache_bytes = file > kCacheHeaderBytes ? file - kCacheHeaderBytes : 0;
  if (r.raw_bytes > 0) {
    r.ratio = static_cast<double>(r.cache_bytes) / static_cast<double>(r.raw_bytes);
  }
  return r;
}

}  // namespace racc::cachestore
