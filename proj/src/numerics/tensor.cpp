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

#include "racc/numerics/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace racc {

namespace {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_shape(const Shape& shape) {
  if (shape.empty()) {
    throw std::invalid_argument("tensor shape must have at least one dimension");
  }
  for (std::size_t d : shape) {
    if (d == 0) {
      throw std::invalid_argument("tensor dimensions must be positive, got " +
                                  shape_to_string(shape));
    }
  }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data_.size()) +
                                " does not match shape " +
                                shape_to_string(shape_));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::randn(std::size_t rows, std::size_t cols, double stddev,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t({rows, cols});
  for (double& v : t.data_) v = dist(rng);
  return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw std::invalid_argument("from_rows: empty input");
  }
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw std::invalid_argument("from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw std::out_of_range("axis " + std::to_string(axis) +
                            " out of range for shape " +
                            shape_to_string(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " +
                                shape_to_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::row_block(std::size_t r0, std::size_t r1) const {
  if (rank() != 2 || r0 >= r1 || r1 > rows()) {
    throw std::out_of_range("row_block [" + std::to_string(r0) + ", " +
                            std::to_string(r1) + ") of " +
                            shape_to_string(shape_));
  }
  const std::size_t c = cols();
  return Tensor({r1 - r0, c},
                std::vector<double>(data_.begin() + static_cast<long>(r0 * c),
                                    data_.begin() + static_cast<long>(r1 * c)));
}

Tensor Tensor::slab(std::size_t index) const {
  if (rank() != 3 || index >= shape_[0]) {
    throw std::out_of_range("slab " + std::to_string(index) + " of " +
                            shape_to_string(shape_));
  }
  const std::size_t n = shape_[1] * shape_[2];
  return Tensor({shape_[1], shape_[2]},
                std::vector<double>(data_.begin() + static_cast<long>(index * n),
                                    data_.begin() + static_cast<long>((index + 1) * n)));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs_diff(const Tensor& other) const {
  if (shape_ != other.shape_) {
    throw std::invalid_argument("max_abs_diff: shape " +
                                shape_to_string(shape_) + " vs " +
                                shape_to_string(other.shape_));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    m = std::max(m, std::abs(data_[i] - other.data_[i]));
  }
  return m;
}

double Tensor::norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Tensor vstack(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.cols() != cols) {
      throw std::invalid_argument("vstack: column mismatch");
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Tensor& p : parts) {
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return Tensor({rows, cols}, std::move(data));
}

std::uint64_t checksum(std::span<const Parameter* const> params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Parameter* p : params) {
    const auto bytes = std::as_bytes(p->value.data());
    for (std::byte b : bytes) {
      h ^= static_cast<std::uint64_t>(b);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace racc
