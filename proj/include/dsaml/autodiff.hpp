// Copyright 2026 The DSAML Authors
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
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsaml/params.hpp"
#include "dsaml/tensor.hpp"

namespace dsaml {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

struct BackwardArgs {
  const Tensor& out;
  const Tensor& out_grad;
  std::span<const Tensor* const> in;
  // Null where the input needs no gradient.
  std::span<Tensor* const> in_grad;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

// Define-by-run tape. Every op evaluates eagerly and appends a node; nodes are
// therefore stored in topological order. backward() walks the tape in reverse.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Non-trainable leaf.
  Var constant(Tensor value, std::string name = {});

  // Trainable leaf. Binding the same name twice yields the same node, so a
  // parameter shared by several sub-networks accumulates one gradient.
  Var param(const std::string& name, const Tensor& value);
  Var param(const ParamSet& params, const std::string& name) {
    return param(name, params.at(name));
  }

  Var record(Tensor value, std::string op, std::vector<Var> inputs,
             BackwardFn backward);

  const Tensor& value(Var v) const;
  // Null until backward() has produced a gradient for v.
  const Tensor* grad(Var v) const;
  bool requires_grad(Var v) const;

  // Reverse sweep from a scalar node. Returns the gradient of every bound
  // parameter (zeros when the loss does not depend on it).
  ParamSet backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::string& op_name(Var v) const;
  std::string node_path(std::size_t id) const;

  // RAII name scope used in error messages ("transformer/layer1/attn").
  class Scope {
   public:
    Scope(Graph& graph, const std::string& name);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph& graph_;
    std::size_t previous_length_;
  };

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string op;
    std::string scope;
  };

  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> params_;
  std::vector<std::string> param_order_;
  std::string scope_;
  bool backward_done_ = false;
};

// Elementwise arithmetic on equal shapes.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
// x [m, n] + bias [n] broadcast over rows.
Var add_bias(Var x, Var bias);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);

// Row-wise softmax. Entries where mask == 0 receive -1e9 before the
// exponential, so they come out as exact zeros and pass no gradient.
Var softmax_rows(Var logits);
Var masked_softmax_rows(Var logits, const Tensor& mask);

// Row-wise layer normalization with gain/bias [n].
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var reverse_rows(Var a);
Var reshape(Var a, Shape shape);
// Main diagonal of a square matrix, as a [n] vector.
Var diag(Var a);

Var sum(Var a);
Var mean(Var a);
Var sum_squares(Var a);

// x [B, Cin, H, W], weight [Cout, Cin, KH, KW], bias [Cout]; stride 1, zero
// padding so that odd kernels preserve H and W.
Var conv2d(Var x, Var weight, Var bias);

// Sum of a non-empty list of same-shaped nodes.
Var add_n(const std::vector<Var>& parts);

}  // namespace dsaml
