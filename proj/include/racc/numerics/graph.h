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
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "racc/numerics/tensor.h"

namespace racc {

// Tape-based reverse-mode differentiation.
//
// A Graph records every op in creation order, which is already a valid
// topological order. Nodes whose inputs all lack requires_grad are plain
// values and are skipped by backward().

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StaleGraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class OpKind {
  kLeaf,
  kConstant,
  kMatMul,
  kAdd,  // same shape, or (m x n) + (1 x n) row broadcast
  kMul,  // elementwise, same shape
  kConcat,
  kSlice,
  kTranspose,
  kSoftmax,    // last axis
  kLayerNorm,  // last axis; inputs (x, gamma, beta)
  kRelu,
  kEmbeddingLookup,  // inputs (table); attrs.ids
  kCrossEntropy,     // inputs (logits); attrs.ids, -1 = ignored row
  kScale,
  kSum,
  kStopGradient,
};

const char* op_name(OpKind kind);

struct OpAttrs {
  std::size_t axis = 0;
  std::size_t row_begin = 0, row_end = 0;
  std::size_t col_begin = 0, col_end = 0;
  double scalar = 1.0;
  std::vector<int> ids;
};

using NodeId = std::size_t;

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

/// Gradient table produced by Graph::backward.
class Gradients {
 public:
  /// Gradient w.r.t. a node; zeros shaped like the node when no path exists.
  Tensor of(const Var& v) const;
  /// Gradient w.r.t. a parameter leaf; zeros when the parameter never
  /// entered the graph or received no contribution.
  Tensor of(const Parameter& p) const;
  bool has(const Var& v) const;

 private:
  friend class Graph;
  const Graph* graph_ = nullptr;
  std::vector<Tensor> by_node_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter. Trainable parameters require grad; frozen
  /// parameters are recorded as constants. Repeated calls return the same
  /// node.
  Var param(const Parameter& p);
  /// Leaf that requires grad, not tied to a Parameter (used in tests).
  Var variable(Tensor value);

  Var apply(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});
  Var apply(OpKind kind, std::initializer_list<Var> inputs,
            const OpAttrs& attrs = {}) {
    return apply(kind, std::span<const Var>(inputs.begin(), inputs.size()),
                 attrs);
  }

  /// Reverse sweep from a 1x1 loss. A graph supports one backward pass.
  Gradients backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const {
    return nodes_.at(id).inputs;
  }

 private:
  struct Node {
    OpKind kind = OpKind::kConstant;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor aux;  // op-specific saved state (softmax probs, normalized x, ...)
    OpAttrs attrs;
    bool requires_grad = false;
  };

  Var push(Node node);
  void backprop_node(const Node& node, const Tensor& grad,
                     std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
  bool backward_done_ = false;
};

// Op wrappers. Every wrapper routes through Graph::apply.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var slice(const Var& x, std::size_t row_begin, std::size_t row_end,
          std::size_t col_begin, std::size_t col_end);
Var slice_rows(const Var& x, std::size_t row_begin, std::size_t row_end);
Var slice_cols(const Var& x, std::size_t col_begin, std::size_t col_end);
Var transpose(const Var& x);
Var softmax(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta);
Var relu(const Var& x);
Var embedding_lookup(const Var& table, std::span<const int> ids);
/// Mean token cross-entropy over rows whose target is not -1.
Var cross_entropy(const Var& logits, std::span<const int> targets);
Var scale(const Var& x, double factor);
Var sum(const Var& x);
Var stop_gradient(const Var& x);

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace racc
