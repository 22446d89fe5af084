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


#include "racc/app/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace racc::app {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void row(std::ostringstream& os, const std::string& name,
         const std::string& value) {
  os << "  " << name;
  for (std::size_t i = name.size(); i < 28; ++i) os << ' ';
  os << value << '\n';
}

}  // namespace

double vqa_accuracy(const std::string& prediction,
                    const std::vector<std::string>& answers) {
  if (answers.empty()) {
    throw std::invalid_argument("vqa_accuracy: no annotations");
  }
  const auto hits = std::count(answers.begin(), answers.end(), prediction);
  return std::min(static_cast<double>(hits) / 3.0, 1.0);
}

double LatencyReport::saving() const {
  return without_cache_s > 0.0 ? 1.0 - with_cache_s / without_cache_s : 0.0;
}

json LatencyReport::to_json() const {
  return {{"instances", instances},
          {"without_cache_s", without_cache_s},
          {"with_cache_s", with_cache_s},
          {"saving", saving()},
          {"answers_identical", answers_identical}};
}

std::vector<LossSample> sample_losses(std::span<const double> losses,
                                      std::size_t every) {
  if (every == 0) throw std::invalid_argument("sample_losses: every must be positive");
  std::vector<LossSample> out;
  for (std::size_t begin = 0; begin < losses.size(); begin += every) {
    const std::size_t end = std::min(begin + every, losses.size());
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += losses[i];
    out.push_back({static_cast<std::int64_t>(end),
                   sum / static_cast<double>(end - begin)});
  }
  return out;
}

json MetricsReport::to_json(bool include_timing) const {
  json curve = json::array();
  for (const auto& s : loss_curve) curve.push_back({{"step", s.step}, {"loss", s.loss}});
  json j = {{"variant", variant},
            {"toggles", toggles},
            {"val_instances", val_instances},
            {"vqa_accuracy", vqa_accuracy},
            {"baseline_accuracy", baseline_accuracy},
            {"prrecall",
             {{"at_1", prrecall_at_1}, {"at_3", prrecall_at_3}, {"at_5", prrecall_at_5}}},
            {"loss_curve", curve}};
  if (disk) {
    j["disk"] = {{"raw_bytes", disk->raw_bytes},
                 {"cache_bytes", disk->cache_bytes},
                 {"ratio", disk->ratio ? json(*disk->ratio) : json(disk->ratio_text())}};
  }
  if (include_timing && latency) j["latency"] = latency->to_json();
  return j;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "RACC metrics (" << variant << ", " << toggles << ")\n";
  row(os, "val instances", std::to_string(val_instances));
  row(os, "VQA accuracy", fixed(100.0 * vqa_accuracy, 2) + " %");
  row(os, "no-prefix baseline", fixed(100.0 * baseline_accuracy, 2) + " %");
  row(os, "PRRecall@1", fixed(100.0 * prrecall_at_1, 2) + " %");
  row(os, "PRRecall@3", fixed(100.0 * prrecall_at_3, 2) + " %");
  row(os, "PRRecall@5", fixed(100.0 * prrecall_at_5, 2) + " %");
  if (latency) {
    row(os, "latency w/o pre-save", fixed(1e3 * latency->without_cache_s, 3) + " ms");
    row(os, "latency w/ pre-save", fixed(1e3 * latency->with_cache_s, 3) + " ms");
    row(os, "latency saving", fixed(100.0 * latency->saving(), 1) + " %");
  }
  if (disk) {
    row(os, "raw corpus bytes", std::to_string(disk->raw_bytes));
    row(os, "cache bytes", std::to_string(disk->cache_bytes));
    row(os, "cache / raw", disk->ratio_text());
  }
  if (!loss_curve.empty()) {
    row(os, "first window loss", fixed(loss_curve.front().loss, 4));
    row(os, "last window loss", fixed(loss_curve.back().loss, 4));
  }
  return os.str();
}

}  // namespace racc::app
