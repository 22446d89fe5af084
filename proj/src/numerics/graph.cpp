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

#include "racc/numerics/graph.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace racc {

namespace {

[[noreturn]] void shape_fail(OpKind kind, const std::string& detail) {
  throw ShapeError(std::string(op_name(kind)) + ": " + detail);
}

void require_rank2(OpKind kind, const Tensor& t, const char* what) {
  if (t.is_null()) shape_fail(kind, std::string(what) + " is an empty tensor");
  if (t.rank() != 2) {
    shape_fail(kind, std::string(what) + " must be rank 2, got " +
                         shape_to_string(t.shape()));
  }
}

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* out_row = out + i * n;
    const double* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
    }
  }
}

// out[m x k] += g[m x n] * b[k x n]^T, via a transposed copy of b so the
// inner loop runs over contiguous memory.
void gemm_nt(const double* g, const double* b, double* out, std::size_t m,
             std::size_t n, std::size_t k) {
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  gemm_nn(g, bt.data(), out, m, n, k);
}

// out[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    const double* g_row = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_row[p];
      if (av == 0.0) continue;
      double* out_row = out + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * g_row[j];
    }
  }
}

void accumulate(std::vector<Tensor>& grads, NodeId id, const Tensor& g) {
  Tensor& slot = grads[id];
  if (slot.is_null()) {
    slot = g;
    return;
  }
  auto dst = slot.mutable_data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kRelu: return "relu";
    case OpKind::kEmbeddingLookup: return "embedding_lookup";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kStopGradient: return "stop_gradient";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Tensor Gradients::of(const Var& v) const {
  if (v.id() < by_node_.size() && !by_node_[v.id()].is_null()) {
    return by_node_[v.id()];
  }
  return Tensor(v.value().shape());
}

Tensor Gradients::of(const Parameter& p) const {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end() && !by_node_[it->second].is_null()) {
    return by_node_[it->second];
  }
  return Tensor(p.value.shape());
}

bool Gradients::has(const Var& v) const {
  return v.id() < by_node_.size() && !by_node_[v.id()].is_null();
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.kind = p.trainable ? OpKind::kLeaf : OpKind::kConstant;
  n.value = p.value;
  n.requires_grad = p.trainable;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Graph::apply(OpKind kind, std::span<const Var> inputs,
                 const OpAttrs& attrs) {
  if (backward_done_) {
    throw StaleGraphError("graph already differentiated; build a new graph");
  }
  for (const Var& in : inputs) {
    if (&in.graph() != this) shape_fail(kind, "input belongs to another graph");
  }
  Node node;
  node.kind = kind;
  node.attrs = attrs;
  for (const Var& in : inputs) {
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || in.requires_grad();
  }
  auto in_value = [&](std::size_t i) -> const Tensor& {
    return nodes_[node.inputs[i]].value;
  };
  auto expect_arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      shape_fail(kind, "expects " + std::to_string(n) + " inputs, got " +
                           std::to_string(inputs.size()));
    }
  };

  switch (kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      shape_fail(kind, "leaves are created with constant()/param()");

    case OpKind::kMatMul: {
      expect_arity(2);
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      require_rank2(kind, a, "lhs");
      require_rank2(kind, b, "rhs");
      if (a.cols() != b.rows()) {
        shape_fail(kind, "inner dimensions differ: " +
                             shape_to_string(a.shape()) + " x " +
                             shape_to_string(b.shape()));
      }
      Tensor out({a.rows(), b.cols()});
      gemm_nn(a.data().data(), b.data().data(), out.mutable_data().data(),
              a.rows(), a.cols(), b.cols());
      node.value = std::move(out);
      break;
    }

    case OpKind::kAdd: {
      expect_arity(2);
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      require_rank2(kind, a, "lhs");
      require_rank2(kind, b, "rhs");
      const bool broadcast = b.rows() == 1 && a.rows() != 1;
      if (a.cols() != b.cols() || (!broadcast && a.rows() != b.rows())) {
        shape_fail(kind, "cannot add " + shape_to_string(a.shape()) + " and " +
                             shape_to_string(b.shape()));
      }
      Tensor out = a;
      auto o = out.mutable_data();
      auto bd = b.data();
      const std::size_t n = a.cols();
      for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] += broadcast ? bd[i % n] : bd[i];
      }
      node.value = std::move(out);
      break;
    }

    case OpKind::kMul: {
      expect_arity(2);
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      if (a.is_null() || a.shape() != b.shape()) {
        shape_fail(kind, "elementwise shapes differ: " +
                             shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
      }
      Tensor out = a;
      auto o = out.mutable_data();
      auto bd = b.data();
      for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
      node.value = std::move(out);
      break;
    }

    case OpKind::kConcat: {
      if (inputs.empty()) shape_fail(kind, "no inputs");
      if (attrs.axis > 1) shape_fail(kind, "axis must be 0 or 1");
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        require_rank2(kind, in_value(i), "input");
      }
      const Tensor& first = in_value(0);
      if (attrs.axis == 0) {
        std::size_t rows = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          if (in_value(i).cols() != first.cols()) {
            shape_fail(kind, "column counts differ along axis 0: " +
                                 shape_to_string(first.shape()) + " vs " +
                                 shape_to_string(in_value(i).shape()));
          }
          rows += in_value(i).rows();
        }
        std::vector<double> data;
        data.reserve(rows * first.cols());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          auto d = in_value(i).data();
          data.insert(data.end(), d.begin(), d.end());
        }
        node.value = Tensor({rows, first.cols()}, std::move(data));
      } else {
        std::size_t cols = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          if (in_value(i).rows() != first.rows()) {
            shape_fail(kind, "row counts differ along axis 1: " +
                                 shape_to_string(first.shape()) + " vs " +
                                 shape_to_string(in_value(i).shape()));
          }
          cols += in_value(i).cols();
        }
        Tensor out({first.rows(), cols});
        std::size_t offset = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          const Tensor& t = in_value(i);
          for (std::size_t r = 0; r < t.rows(); ++r) {
            for (std::size_t c = 0; c < t.cols(); ++c) {
              out(r, offset + c) = t(r, c);
            }
          }
          offset += t.cols();
        }
        node.value = std::move(out);
      }
      break;
    }

    case OpKind::kSlice: {
      expect_arity(1);
      const Tensor& x = in_value(0);
      require_rank2(kind, x, "input");
      if (attrs.row_begin >= attrs.row_end || attrs.row_end > x.rows() ||
          attrs.col_begin >= attrs.col_end || attrs.col_end > x.cols()) {
        shape_fail(kind, "range rows [" + std::to_string(attrs.row_begin) +
                             "," + std::to_string(attrs.row_end) + ") cols [" +
                             std::to_string(attrs.col_begin) + "," +
                             std::to_string(attrs.col_end) + ") invalid for " +
                             shape_to_string(x.shape()));
      }
      Tensor out({attrs.row_end - attrs.row_begin,
                  attrs.col_end - attrs.col_begin});
      for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
          out(r, c) = x(attrs.row_begin + r, attrs.col_begin + c);
        }
      }
      node.value = std::move(out);
      break;
    }

    case OpKind::kTranspose: {
      expect_arity(1);
      const Tensor& x = in_value(0);
      require_rank2(kind, x, "input");
      Tensor out({x.cols(), x.rows()});
      for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) out(c, r) = x(r, c);
      }
      node.value = std::move(out);
      break;
    }

    case OpKind::kSoftmax: {
      expect_arity(1);
      const Tensor& x = in_value(0);
      if (x.is_null()) shape_fail(kind, "softmax over an empty axis");
      require_rank2(kind, x, "input");
      Tensor out = x;
      const std::size_t n = x.cols();
      auto o = out.mutable_data();
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double* row = o.data() + r * n;
        const double mx = *std::max_element(row, row + n);
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          row[c] = std::exp(row[c] - mx);
          total += row[c];
        }
        for (std::size_t c = 0; c < n; ++c) row[c] /= total;
      }
      node.value = std::move(out);
      break;
    }

    case OpKind::kLayerNorm: {
      expect_arity(3);
      const Tensor& x = in_value(0);
      const Tensor& gamma = in_value(1);
      const Tensor& beta = in_value(2);
      require_rank2(kind, x, "input");
      const std::size_t n = x.cols();
      if (gamma.shape() != Shape{1, n} || beta.shape() != Shape{1, n}) {
        shape_fail(kind, "gamma/beta must be [1x" + std::to_string(n) +
                             "], got " + shape_to_string(gamma.shape()) +
                             " and " + shape_to_string(beta.shape()));
      }
      Tensor xhat({x.rows(), n});
      Tensor inv_std({x.rows(), 1});
      Tensor out({x.rows(), n});
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < n; ++c) mean += x(r, c);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double d = x(r, c) - mean;
          var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std(r, 0) = inv;
        for (std::size_t c = 0; c < n; ++c) {
          xhat(r, c) = (x(r, c) - mean) * inv;
          out(r, c) = xhat(r, c) * gamma(0, c) + beta(0, c);
        }
      }
      node.value = std::move(out);
      // aux packs [xhat | inv_std] column-wise.
      Tensor aux({x.rows(), n + 1});
      for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) aux(r, c) = xhat(r, c);
        aux(r, n) = inv_std(r, 0);
      }
      node.aux = std::move(aux);
      break;
    }

    case OpKind::kRelu: {
      expect_arity(1);
      const Tensor& x = in_value(0);
      if (x.is_null()) shape_fail(kind, "empty input");
      Tensor out = x;
      for (double& v : out.mutable_data()) v = v < 0.0 ? 0.0 : v;
      node.value = std::move(out);
      break;
    }

    case OpKind::kEmbeddingLookup: {
      expect_arity(1);
      const Tensor& table = in_value(0);
      require_rank2(kind, table, "table");
      if (attrs.ids.empty()) shape_fail(kind, "empty id sequence");
      Tensor out({attrs.ids.size(), table.cols()});
      for (std::size_t i = 0; i < attrs.ids.size(); ++i) {
        const int id = attrs.ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
          shape_fail(kind, "id " + std::to_string(id) +
                               " outside table of " +
                               std::to_string(table.rows()) + " rows");
        }
        for (std::size_t c = 0; c < table.cols(); ++c) {
          out(i, c) = table(static_cast<std::size_t>(id), c);
        }
      }
      node.value = std::move(out);
      break;
    }

    case OpKind::kCrossEntropy: {
      expect_arity(1);
      const Tensor& logits = in_value(0);
      require_rank2(kind, logits, "logits");
      if (attrs.ids.size() != logits.rows()) {
        shape_fail(kind, std::to_string(attrs.ids.size()) +
                             " targets for " + std::to_string(logits.rows()) +
                             " logit rows");
      }
      const std::size_t v = logits.cols();
      Tensor probs = logits;
      auto p = probs.mutable_data();
      double loss = 0.0;
      std::size_t counted = 0;
      for (std::size_t r = 0; r < logits.rows(); ++r) {
        double* row = p.data() + r * v;
        const double mx = *std::max_element(row, row + v);
        double total = 0.0;
        for (std::size_t c = 0; c < v; ++c) total += std::exp(row[c] - mx);
        const double lse = mx + std::log(total);
        const int t = attrs.ids[r];
        if (t >= 0) {
          if (static_cast<std::size_t>(t) >= v) {
            shape_fail(kind, "target " + std::to_string(t) +
                                 " outside vocabulary of " + std::to_string(v));
          }
          loss += lse - logits(r, static_cast<std::size_t>(t));
          ++counted;
        }
        for (std::size_t c = 0; c < v; ++c) row[c] = std::exp(row[c] - lse);
      }
      if (counted == 0) shape_fail(kind, "no target rows (all ignored)");
      node.value = Tensor::scalar(loss / static_cast<double>(counted));
      node.aux = std::move(probs);
      node.attrs.scalar = static_cast<double>(counted);
      break;
    }

    case OpKind::kScale: {
      expect_arity(1);
      const Tensor& x = in_value(0);
      if (x.is_null()) shape_fail(kind, "empty input");
      Tensor out = x;
      for (double& v : out.mutable_data()) v *= attrs.scalar;
      node.value = std::move(out);
      break;
    }

    case OpKind::kSum: {
      expect_arity(1);
      const Tensor& x = in_value(0);
      if (x.is_null()) shape_fail(kind, "empty input");
      double s = 0.0;
      for (double v : x.data()) s += v;
      node.value = Tensor::scalar(s);
      break;
    }

    case OpKind::kStopGradient: {
      expect_arity(1);
      node.value = in_value(0);
      node.requires_grad = false;
      break;
    }
  }
  return push(std::move(node));
}

void Graph::backprop_node(const Node& node, const Tensor& grad,
                          std::vector<Tensor>& grads) const {
  auto wants = [&](std::size_t i) {
    return nodes_[node.inputs[i]].requires_grad;
  };
  auto input = [&](std::size_t i) -> const Tensor& {
    return nodes_[node.inputs[i]].value;
  };

  switch (node.kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
    case OpKind::kStopGradient:
      return;

    case OpKind::kMatMul: {
      const Tensor& a = input(0);
      const Tensor& b = input(1);
      if (wants(0)) {
        Tensor ga(a.shape());
        gemm_nt(grad.data().data(), b.data().data(),
                ga.mutable_data().data(), a.rows(), b.cols(), a.cols());
        accumulate(grads, node.inputs[0], ga);
      }
      if (wants(1)) {
        Tensor gb(b.shape());
        gemm_tn(a.data().data(), grad.data().data(),
                gb.mutable_data().data(), a.rows(), a.cols(), b.cols());
        accumulate(grads, node.inputs[1], gb);
      }
      return;
    }

    case OpKind::kAdd: {
      if (wants(0)) accumulate(grads, node.inputs[0], grad);
      if (wants(1)) {
        const Tensor& b = input(1);
        if (b.shape() == grad.shape()) {
          accumulate(grads, node.inputs[1], grad);
        } else {
          Tensor gb(b.shape());
          for (std::size_t r = 0; r < grad.rows(); ++r) {
            for (std::size_t c = 0; c < grad.cols(); ++c) gb(0, c) += grad(r, c);
          }
          accumulate(grads, node.inputs[1], gb);
        }
      }
      return;
    }

    case OpKind::kMul: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        Tensor g = grad;
        auto gd = g.mutable_data();
        auto other = input(1 - k).data();
        for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= other[i];
        accumulate(grads, node.inputs[k], g);
      }
      return;
    }

    case OpKind::kConcat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const Tensor& part = input(k);
        if (wants(k)) {
          Tensor g(part.shape());
          for (std::size_t r = 0; r < part.rows(); ++r) {
            for (std::size_t c = 0; c < part.cols(); ++c) {
              g(r, c) = node.attrs.axis == 0 ? grad(offset + r, c)
                                             : grad(r, offset + c);
            }
          }
          accumulate(grads, node.inputs[k], g);
        }
        offset += node.attrs.axis == 0 ? part.rows() : part.cols();
      }
      return;
    }

    case OpKind::kSlice: {
      Tensor g(input(0).shape());
      for (std::size_t r = 0; r < grad.rows(); ++r) {
        for (std::size_t c = 0; c < grad.cols(); ++c) {
          g(node.attrs.row_begin + r, node.attrs.col_begin + c) = grad(r, c);
        }
      }
      accumulate(grads, node.inputs[0], g);
      return;
    }

    case OpKind::kTranspose: {
      Tensor g({grad.cols(), grad.rows()});
      for (std::size_t r = 0; r < grad.rows(); ++r) {
        for (std::size_t c = 0; c < grad.cols(); ++c) g(c, r) = grad(r, c);
      }
      accumulate(grads, node.inputs[0], g);
      return;
    }

    case OpKind::kSoftmax: {
      const Tensor& p = node.value;
      Tensor g(p.shape());
      for (std::size_t r = 0; r < p.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < p.cols(); ++c) dot += grad(r, c) * p(r, c);
        for (std::size_t c = 0; c < p.cols(); ++c) {
          g(r, c) = p(r, c) * (grad(r, c) - dot);
        }
      }
      accumulate(grads, node.inputs[0], g);
      return;
    }

    case OpKind::kLayerNorm: {
      const Tensor& gamma = input(1);
      const std::size_t n = gamma.cols();
      const Tensor& aux = node.aux;
      if (wants(0)) {
        Tensor gx({grad.rows(), n});
        for (std::size_t r = 0; r < grad.rows(); ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            const double d = grad(r, c) * gamma(0, c);
            mean_d += d;
            mean_dx += d * aux(r, c);
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          const double inv = aux(r, n);
          for (std::size_t c = 0; c < n; ++c) {
            const double d = grad(r, c) * gamma(0, c);
            gx(r, c) = inv * (d - mean_d - aux(r, c) * mean_dx);
          }
        }
        accumulate(grads, node.inputs[0], gx);
      }
      if (wants(1)) {
        Tensor gg({1, n});
        for (std::size_t r = 0; r < grad.rows(); ++r) {
          for (std::size_t c = 0; c < n; ++c) gg(0, c) += grad(r, c) * aux(r, c);
        }
        accumulate(grads, node.inputs[1], gg);
      }
      if (wants(2)) {
        Tensor gb({1, n});
        for (std::size_t r = 0; r < grad.rows(); ++r) {
          for (std::size_t c = 0; c < n; ++c) gb(0, c) += grad(r, c);
        }
        accumulate(grads, node.inputs[2], gb);
      }
      return;
    }

    case OpKind::kRelu: {
      Tensor g = grad;
      auto gd = g.mutable_data();
      auto x = input(0).data();
      for (std::size_t i = 0; i < gd.size(); ++i) {
        if (!(x[i] > 0.0)) gd[i] = 0.0;
      }
      accumulate(grads, node.inputs[0], g);
      return;
    }

    case OpKind::kEmbeddingLookup: {
      Tensor g(input(0).shape());
      for (std::size_t i = 0; i < node.attrs.ids.size(); ++i) {
        const auto row = static_cast<std::size_t>(node.attrs.ids[i]);
        for (std::size_t c = 0; c < g.cols(); ++c) g(row, c) += grad(i, c);
      }
      accumulate(grads, node.inputs[0], g);
      return;
    }

    case OpKind::kCrossEntropy: {
      const double upstream = grad.item() / node.attrs.scalar;
      Tensor g = node.aux;
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const int t = node.attrs.ids[r];
        for (std::size_t c = 0; c < g.cols(); ++c) {
          g(r, c) = t < 0 ? 0.0 : g(r, c) * upstream;
        }
        if (t >= 0) g(r, static_cast<std::size_t>(t)) -= upstream;
      }
      accumulate(grads, node.inputs[0], g);
      return;
    }

    case OpKind::kScale: {
      Tensor g = grad;
      for (double& v : g.mutable_data()) v *= node.attrs.scalar;
      accumulate(grads, node.inputs[0], g);
      return;
    }

    case OpKind::kSum: {
      Tensor g(input(0).shape(), grad.item());
      accumulate(grads, node.inputs[0], g);
      return;
    }
  }
}

Gradients Graph::backward(const Var& loss) {
  if (backward_done_) {
    throw StaleGraphError(
        "backward() already ran on this graph; re-run the forward pass");
  }
  if (&loss.graph() != this) {
    throw std::invalid_argument("backward: loss belongs to another graph");
  }
  if (loss.value().numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     shape_to_string(loss.shape()));
  }
  backward_done_ = true;

  Gradients out;
  out.graph_ = this;
  out.param_nodes_ = param_nodes_;
  out.by_node_.resize(nodes_.size());
  if (!nodes_[loss.id()].requires_grad) return out;

  out.by_node_[loss.id()] = Tensor(loss.shape(), 1.0);
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || out.by_node_[id].is_null()) continue;
    backprop_node(node, out.by_node_[id], out.by_node_);
  }
  return out;
}

Var matmul(const Var& a, const Var& b) {
  return a.graph().apply(OpKind::kMatMul, {a, b});
}

Var add(const Var& a, const Var& b) {
  return a.graph().apply(OpKind::kAdd, {a, b});
}

Var mul(const Var& a, const Var& b) {
  return a.graph().apply(OpKind::kMul, {a, b});
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  OpAttrs attrs;
  attrs.axis = axis;
  return parts.front().graph().apply(OpKind::kConcat, parts, attrs);
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice(const Var& x, std::size_t row_begin, std::size_t row_end,
          std::size_t col_begin, std::size_t col_end) {
  OpAttrs attrs;
  attrs.row_begin = row_begin;
  attrs.row_end = row_end;
  attrs.col_begin = col_begin;
  attrs.col_end = col_end;
  return x.graph().apply(OpKind::kSlice, {x}, attrs);
}

Var slice_rows(const Var& x, std::size_t row_begin, std::size_t row_end) {
  return slice(x, row_begin, row_end, 0, x.cols());
}

Var slice_cols(const Var& x, std::size_t col_begin, std::size_t col_end) {
  return slice(x, 0, x.rows(), col_begin, col_end);
}

Var transpose(const Var& x) {
  return x.graph().apply(OpKind::kTranspose, {x});
}

Var softmax(const Var& x) { return x.graph().apply(OpKind::kSoftmax, {x}); }

Var layer_norm(const Var& x, const Var& gamma, const Var& beta) {
  return x.graph().apply(OpKind::kLayerNorm, {x, gamma, beta});
}

Var relu(const Var& x) { return x.graph().apply(OpKind::kRelu, {x}); }

Var embedding_lookup(const Var& table, std::span<const int> ids) {
  OpAttrs attrs;
  attrs.ids.assign(ids.begin(), ids.end());
  return table.graph().apply(OpKind::kEmbeddingLookup, {table}, attrs);
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  OpAttrs attrs;
  attrs.ids.assign(targets.begin(), targets.end());
  return logits.graph().apply(OpKind::kCrossEntropy, {logits}, attrs);
}

Var scale(const Var& x, double factor) {
  OpAttrs attrs;
  attrs.scalar = factor;
  return x.graph().apply(OpKind::kScale, {x}, attrs);
}

Var sum(const Var& x) { return x.graph().apply(OpKind::kSum, {x}); }

Var stop_gradient(const Var& x) {
  return x.graph().apply(OpKind::kStopGradient, {x});
}

}  // namespace racc
