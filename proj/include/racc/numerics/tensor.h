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

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace racc {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major float64 array. A default-constructed Tensor is "null"
/// (no shape, no data); every constructed Tensor has positive dimensions.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }
  static Tensor full(std::size_t rows, std::size_t cols, double value) {
    return Tensor({rows, cols}, value);
  }
  static Tensor identity(std::size_t n);
  static Tensor scalar(double value) { return Tensor({1, 1}, value); }
  /// rows x cols with N(0, stddev^2) entries.
  static Tensor randn(std::size_t rows, std::size_t cols, double stddev,
                      std::mt19937_64& rng);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  bool is_null() const { return shape_.empty(); }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  /// Leading extent for rank-2 tensors.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }
  double item() const;

  /// Copy of rows [r0, r1) of a rank-2 tensor.
  Tensor row_block(std::size_t r0, std::size_t r1) const;
  /// Rank-2 slab `index` of a rank-3 tensor.
  Tensor slab(std::size_t index) const;

  bool all_finite() const;
  double max_abs_diff(const Tensor& other) const;
  double norm() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Vertically stacks rank-2 tensors with equal column counts.
Tensor vstack(std::span<const Tensor> parts);

/// Named tensor owned by a model. Frozen parameters enter graphs as
/// constants and never receive gradients.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// FNV-1a over the raw bytes of a sequence of parameters.
std::uint64_t checksum(std::span<const Parameter* const> params);

}  // namespace racc
