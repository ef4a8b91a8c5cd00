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
#include "dsaml/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "dsaml/error.hpp"

namespace dsaml {
namespace {

constexpr double kMaskedLogit = -1e9;

Graph& owner(Var v) {
  if (!v.valid()) throw Error("operation on an unbound Var");
  return *v.graph();
}

Graph& common_owner(Var a, Var b) {
  Graph& g = owner(a);
  if (b.graph() != &g) throw Error("operands belong to different graphs");
  return g;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_str(a.shape()));
  }
}

// Unary elementwise op; derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(Var a, const char* name, F f, D dfdx) {
  Graph& g = owner(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return g.record(std::move(y), name, {a}, [dfdx](const BackwardArgs& b) {
    const Tensor& x = *b.in[0];
    Tensor& gx = *b.in_grad[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      gx[i] += b.out_grad[i] * dfdx(x[i], b.out[i]);
    }
  });
}

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m,k] += a[m,n] * b[k,n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      ci[p] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

std::size_t leading(const Tensor& t) {
  if (t.rank() == 0) throw ShapeError("expected at least rank 1");
  return t.dim(0);
}

Var softmax_impl(Var logits, const Tensor* mask) {
  Graph& g = owner(logits);
  const Tensor& x = logits.value();
  require_matrix(x, "softmax_rows");
  if (mask) require_same_shape(x, *mask, "masked_softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y(x.shape());
  std::vector<double> row(n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double v = x.at(i, j);
      if (mask && (*mask).at(i, j) == 0.0) v += kMaskedLogit;
      row[j] = v;
      mx = std::max(mx, v);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = row[j] / total;
  }
  return g.record(std::move(y), mask ? "masked_softmax" : "softmax", {logits},
                  [](const BackwardArgs& b) {
                    const std::size_t m = b.out.rows(), n = b.out.cols();
                    Tensor& gx = *b.in_grad[0];
                    for (std::size_t i = 0; i < m; ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        dot += b.out.at(i, j) * b.out_grad.at(i, j);
                      }
                      for (std::size_t j = 0; j < n; ++j) {
                        gx.at(i, j) += b.out.at(i, j) * (b.out_grad.at(i, j) - dot);
                      }
                    }
                  });
}

}  // namespace

const Tensor& Var::value() const {
  if (!graph_) throw Error("value() on an unbound Var");
  return graph_->value(*this);
}

Var Graph::constant(Tensor value, std::string name) {
  if (!value.all_finite()) {
    throw NumericError("non-finite input '" + name + "'");
  }
  Node node;
  node.value = std::move(value);
  node.op = name.empty() ? "constant" : "input:" + name;
  node.scope = scope_;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) {
    return Var(this, it->second);
  }
  if (!value.all_finite()) {
    throw NumericError("non-finite parameter '" + name + "'");
  }
  Node node;
  node.value = value;
  node.requires_grad = true;
  node.op = "param:" + name;
  node.scope = scope_;
  nodes_.push_back(std::move(node));
  params_.emplace(name, nodes_.size() - 1);
  param_order_.push_back(name);
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::string op, std::vector<Var> inputs,
                  BackwardFn backward) {
  Node node;
  node.op = std::move(op);
  node.scope = scope_;
  for (Var v : inputs) {
    check_owner(v);
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by " +
                       (scope_.empty() ? node.op : scope_ + "/" + node.op));
  }
  node.value = std::move(value);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Graph::check_owner(Var v) const {
  if (v.graph() != this || v.id() >= nodes_.size()) {
    throw Error("Var does not belong to this graph");
  }
}

const Tensor& Graph::value(Var v) const {
  check_owner(v);
  return nodes_[v.id()].value;
}

const Tensor* Graph::grad(Var v) const {
  check_owner(v);
  const Node& n = nodes_[v.id()];
  return n.has_grad ? &n.grad : nullptr;
}

bool Graph::requires_grad(Var v) const {
  check_owner(v);
  return nodes_[v.id()].requires_grad;
}

const std::string& Graph::op_name(Var v) const {
  check_owner(v);
  return nodes_[v.id()].op;
}

std::string Graph::node_path(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.scope.empty() ? n.op : n.scope + "/" + n.op;
}

ParamSet Graph::backward(Var loss) {
  check_owner(loss);
  if (!nodes_[loss.id()].value.is_scalar()) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(nodes_[loss.id()].value.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& root = nodes_[loss.id()];
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;

  std::vector<const Tensor*> in;
  std::vector<Tensor*> in_grad;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    in.clear();
    in_grad.clear();
    for (std::size_t src : node.inputs) {
      Node& s = nodes_[src];
      in.push_back(&s.value);
      if (s.requires_grad) {
        if (!s.has_grad) {
          s.grad = Tensor(s.value.shape());
          s.has_grad = true;
        }
        in_grad.push_back(&s.grad);
      } else {
        in_grad.push_back(nullptr);
      }
    }
    node.backward(BackwardArgs{node.value, node.grad, in, in_grad});
  }
  backward_done_ = true;

  ParamSet grads;
  for (const std::string& name : param_order_) {
    const Node& n = nodes_[params_.at(name)];
    grads.set(name, n.has_grad ? n.grad : Tensor(n.value.shape()));
  }
  return grads;
}

Graph::Scope::Scope(Graph& graph, const std::string& name)
    : graph_(graph), previous_length_(graph.scope_.size()) {
  if (!graph_.scope_.empty()) graph_.scope_ += '/';
  graph_.scope_ += name;
}

Graph::Scope::~Scope() { graph_.scope_.resize(previous_length_); }

// ---------------------------------------------------------------------------

Var operator+(Var a, Var b) {
  Graph& g = common_owner(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return g.record(std::move(y), "add", {a, b}, [](const BackwardArgs& b) {
    for (int k = 0; k < 2; ++k) {
      if (!b.in_grad[k]) continue;
      Tensor& gk = *b.in_grad[k];
      for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += b.out_grad[i];
    }
  });
}

Var operator-(Var a, Var b) {
  Graph& g = common_owner(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return g.record(std::move(y), "sub", {a, b}, [](const BackwardArgs& b) {
    if (b.in_grad[0]) {
      for (std::size_t i = 0; i < b.out_grad.size(); ++i) (*b.in_grad[0])[i] += b.out_grad[i];
    }
    if (b.in_grad[1]) {
      for (std::size_t i = 0; i < b.out_grad.size(); ++i) (*b.in_grad[1])[i] -= b.out_grad[i];
    }
  });
}

Var operator*(Var a, Var b) {
  Graph& g = common_owner(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return g.record(std::move(y), "mul", {a, b}, [](const BackwardArgs& b) {
    const Tensor& x0 = *b.in[0];
    const Tensor& x1 = *b.in[1];
    if (b.in_grad[0]) {
      for (std::size_t i = 0; i < x0.size(); ++i) (*b.in_grad[0])[i] += b.out_grad[i] * x1[i];
    }
    if (b.in_grad[1]) {
      for (std::size_t i = 0; i < x0.size(); ++i) (*b.in_grad[1])[i] += b.out_grad[i] * x0[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double c) {
  return unary(
      a, "add_scalar", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Var add_bias(Var x, Var bias) {
  Graph& g = common_owner(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || xv.rank() == 0 || xv.shape().back() != bv.size()) {
    throw ShapeError("add_bias: " + shape_str(xv.shape()) + " + " +
                     shape_str(bv.shape()));
  }
  const std::size_t n = bv.size();
  Tensor y = xv;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % n];
  return g.record(std::move(y), "add_bias", {x, bias}, [n](const BackwardArgs& b) {
    if (b.in_grad[0]) {
      Tensor& gx = *b.in_grad[0];
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += b.out_grad[i];
    }
    if (b.in_grad[1]) {
      Tensor& gb = *b.in_grad[1];
      for (std::size_t i = 0; i < b.out_grad.size(); ++i) gb[i % n] += b.out_grad[i];
    }
  });
}

Var matmul(Var a, Var b) {
  Graph& g = common_owner(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor y(Shape{m, n});
  gemm_nn(av.raw(), bv.raw(), y.raw(), m, k, n);
  return g.record(std::move(y), "matmul", {a, b}, [m, k, n](const BackwardArgs& b) {
    if (b.in_grad[0]) gemm_nt(b.out_grad.raw(), b.in[1]->raw(), b.in_grad[0]->raw(), m, n, k);
    if (b.in_grad[1]) gemm_tn(b.in[0]->raw(), b.out_grad.raw(), b.in_grad[1]->raw(), m, k, n);
  });
}

Var transpose(Var a) {
  Graph& g = owner(a);
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y.at(j, i) = av.at(i, j);
  }
  return g.record(std::move(y), "transpose", {a}, [m, n](const BackwardArgs& b) {
    Tensor& ga = *b.in_grad[0];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += b.out_grad.at(j, i);
    }
  });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var softmax_rows(Var logits) { return softmax_impl(logits, nullptr); }

Var masked_softmax_rows(Var logits, const Tensor& mask) {
  return softmax_impl(logits, &mask);
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = common_owner(x, gain);
  common_owner(x, bias);
  const Tensor& xv = x.value();
  require_matrix(xv, "layer_norm");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gain.value().shape() != Shape{n} || bias.value().shape() != Shape{n}) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(n) + "]");
  }
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv.at(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      y.at(i, j) = (xv.at(i, j) - mu) * inv * gv[j] + bv[j];
    }
  }
  return g.record(std::move(y), "layer_norm", {x, gain, bias},
                  [m, n, eps](const BackwardArgs& b) {
                    const Tensor& xv = *b.in[0];
                    const Tensor& gv = *b.in[1];
                    std::vector<double> xhat(n), dxhat(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double mu = 0.0;
                      for (std::size_t j = 0; j < n; ++j) mu += xv.at(i, j);
                      mu /= static_cast<double>(n);
                      double var = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = xv.at(i, j) - mu;
                        var += d * d;
                      }
                      var /= static_cast<double>(n);
                      const double inv = 1.0 / std::sqrt(var + eps);
                      double mean_d = 0.0, mean_dx = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        xhat[j] = (xv.at(i, j) - mu) * inv;
                        const double dy = b.out_grad.at(i, j);
                        dxhat[j] = dy * gv[j];
                        mean_d += dxhat[j];
                        mean_dx += dxhat[j] * xhat[j];
                        if (b.in_grad[1]) (*b.in_grad[1])[j] += dy * xhat[j];
                        if (b.in_grad[2]) (*b.in_grad[2])[j] += dy;
                      }
                      if (!b.in_grad[0]) continue;
                      mean_d /= static_cast<double>(n);
                      mean_dx /= static_cast<double>(n);
                      for (std::size_t j = 0; j < n; ++j) {
                        b.in_grad[0]->at(i, j) +=
                            inv * (dxhat[j] - mean_d - xhat[j] * mean_dx);
                      }
                    }
                  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& g = owner(parts[0]);
  const std::size_t m = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    common_owner(parts[0], p);
    const Tensor& v = p.value();
    require_matrix(v, "concat_cols");
    if (v.rows() != m) throw ShapeError("concat_cols: row count mismatch");
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor y(Shape{m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(v.raw() + i * widths[k], widths[k], y.raw() + i * total + offset);
    }
    offset += widths[k];
  }
  return g.record(std::move(y), "concat_cols", parts,
                  [m, total, widths](const BackwardArgs& b) {
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < widths.size(); ++k) {
                      if (b.in_grad[k]) {
                        Tensor& gk = *b.in_grad[k];
                        for (std::size_t i = 0; i < m; ++i) {
                          for (std::size_t j = 0; j < widths[k]; ++j) {
                            gk[i * widths[k] + j] += b.out_grad[i * total + offset + j];
                          }
                        }
                      }
                      offset += widths[k];
                    }
                  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph& g = owner(parts[0]);
  Shape tail(parts[0].value().shape().begin() + 1, parts[0].value().shape().end());
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (Var p : parts) {
    common_owner(parts[0], p);
    const Shape& s = p.value().shape();
    if (s.empty() || Shape(s.begin() + 1, s.end()) != tail) {
      throw ShapeError("concat_rows: trailing shape mismatch " + shape_str(s));
    }
    rows += s[0];
    sizes.push_back(p.value().size());
  }
  Shape out_shape{rows};
  out_shape.insert(out_shape.end(), tail.begin(), tail.end());
  Tensor y(out_shape);
  std::size_t offset = 0;
  for (Var p : parts) {
    std::copy_n(p.value().raw(), p.value().size(), y.raw() + offset);
    offset += p.value().size();
  }
  return g.record(std::move(y), "concat_rows", parts, [sizes](const BackwardArgs& b) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (b.in_grad[k]) {
        Tensor& gk = *b.in_grad[k];
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += b.out_grad[offset + i];
      }
      offset += sizes[k];
    }
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Graph& g = owner(a);
  const Tensor& av = a.value();
  const std::size_t rows = leading(av);
  if (start + count > rows) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_str(av.shape()));
  }
  const std::size_t stride = av.size() / std::max<std::size_t>(rows, 1);
  Shape shape = av.shape();
  shape[0] = count;
  Tensor y(shape);
  std::copy_n(av.raw() + start * stride, count * stride, y.raw());
  return g.record(std::move(y), "slice_rows", {a}, [start, stride](const BackwardArgs& b) {
    Tensor& ga = *b.in_grad[0];
    for (std::size_t i = 0; i < b.out_grad.size(); ++i) {
      ga[start * stride + i] += b.out_grad[i];
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Graph& g = owner(a);
  const Tensor& av = a.value();
  require_matrix(av, "slice_cols");
  const std::size_t m = av.rows(), n = av.cols();
  if (start + count > n) throw ShapeError("slice_cols: out of range");
  Tensor y(Shape{m, count});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.raw() + i * n + start, count, y.raw() + i * count);
  }
  return g.record(std::move(y), "slice_cols", {a},
                  [m, n, start, count](const BackwardArgs& b) {
                    Tensor& ga = *b.in_grad[0];
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < count; ++j) {
                        ga[i * n + start + j] += b.out_grad[i * count + j];
                      }
                    }
                  });
}

Var reverse_rows(Var a) {
  Graph& g = owner(a);
  const Tensor& av = a.value();
  const std::size_t rows = leading(av);
  const std::size_t stride = av.size() / std::max<std::size_t>(rows, 1);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(av.raw() + i * stride, stride, y.raw() + (rows - 1 - i) * stride);
  }
  return g.record(std::move(y), "reverse_rows", {a}, [rows, stride](const BackwardArgs& b) {
    Tensor& ga = *b.in_grad[0];
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < stride; ++j) {
        ga[i * stride + j] += b.out_grad[(rows - 1 - i) * stride + j];
      }
    }
  });
}

Var reshape(Var a, Shape shape) {
  Graph& g = owner(a);
  Tensor y = a.value().reshaped(std::move(shape));
  return g.record(std::move(y), "reshape", {a}, [](const BackwardArgs& b) {
    Tensor& ga = *b.in_grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += b.out_grad[i];
  });
}

Var diag(Var a) {
  Graph& g = owner(a);
  const Tensor& av = a.value();
  require_matrix(av, "diag");
  if (av.rows() != av.cols()) throw ShapeError("diag: matrix is not square");
  const std::size_t n = av.rows();
  Tensor y(Shape{n});
  for (std::size_t i = 0; i < n; ++i) y[i] = av.at(i, i);
  return g.record(std::move(y), "diag", {a}, [n](const BackwardArgs& b) {
    Tensor& ga = *b.in_grad[0];
    for (std::size_t i = 0; i < n; ++i) ga.at(i, i) += b.out_grad[i];
  });
}

Var sum(Var a) {
  Graph& g = owner(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record(Tensor::scalar(s), "sum", {a}, [](const BackwardArgs& b) {
    const double d = b.out_grad[0];
    for (double& v : b.in_grad[0]->values()) v += d;
  });
}

Var mean(Var a) {
  Graph& g = owner(a);
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record(Tensor::scalar(s / static_cast<double>(n)), "mean", {a},
                  [n](const BackwardArgs& b) {
                    const double d = b.out_grad[0] / static_cast<double>(n);
                    for (double& v : b.in_grad[0]->values()) v += d;
                  });
}

Var sum_squares(Var a) {
  Graph& g = owner(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  return g.record(Tensor::scalar(s), "sum_squares", {a}, [](const BackwardArgs& b) {
    const double d = 2.0 * b.out_grad[0];
    const Tensor& x = *b.in[0];
    Tensor& gx = *b.in_grad[0];
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += d * x[i];
  });
}

Var conv2d(Var x, Var weight, Var bias) {
  Graph& g = common_owner(x, weight);
  common_owner(x, bias);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 4 || wv.rank() != 4 || bv.rank() != 1 ||
      wv.dim(1) != xv.dim(1) || bv.size() != wv.dim(0) || wv.dim(2) % 2 == 0 ||
      wv.dim(3) % 2 == 0) {
    throw ShapeError("conv2d: input " + shape_str(xv.shape()) + ", weight " +
                     shape_str(wv.shape()) + ", bias " + shape_str(bv.shape()));
  }
  const std::size_t batch = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const std::size_t cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);

  // Calls fn(out_index, in_index, weight_index) for every valid tap.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t bi = 0; bi < batch; ++bi) {
      for (std::size_t co = 0; co < cout; ++co) {
        const std::size_t out_base = (bi * cout + co) * h * w;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const std::size_t in_base = (bi * cin + ci) * h * w;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const long dy = static_cast<long>(ky) - ph;
            const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
            const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const long dx = static_cast<long>(kx) - pw;
              const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
              const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
              const std::size_t widx = ((co * cin + ci) * kh + ky) * kw + kx;
              for (std::size_t yy = y0; yy < y1; ++yy) {
                const std::size_t orow = out_base + yy * w;
                const std::ptrdiff_t irow =
                    static_cast<std::ptrdiff_t>(in_base) +
                    (static_cast<std::ptrdiff_t>(yy) + dy) * static_cast<std::ptrdiff_t>(w) + dx;
                fn(orow, irow, x0, x1, widx);
              }
            }
          }
        }
      }
    }
  };

  Tensor y(Shape{batch, cout, h, w});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t co = 0; co < cout; ++co) {
      std::fill_n(y.raw() + (bi * cout + co) * h * w, h * w, bv[co]);
    }
  }
  {
    double* yo = y.raw();
    const double* xi = xv.raw();
    const double* wt = wv.raw();
    for_each_tap([&](std::size_t orow, std::ptrdiff_t irow, std::size_t x0,
                     std::size_t x1, std::size_t widx) {
      const double wk = wt[widx];
      for (std::size_t xx = x0; xx < x1; ++xx) yo[orow + xx] += wk * xi[irow + static_cast<std::ptrdiff_t>(xx)];
    });
  }
  return g.record(std::move(y), "conv2d", {x, weight, bias},
                  [for_each_tap, batch, cout, h, w](const BackwardArgs& b) {
                    const double* go = b.out_grad.raw();
                    const double* xi = b.in[0]->raw();
                    const double* wt = b.in[1]->raw();
                    double* gx = b.in_grad[0] ? b.in_grad[0]->raw() : nullptr;
                    double* gw = b.in_grad[1] ? b.in_grad[1]->raw() : nullptr;
                    for_each_tap([&](std::size_t orow, std::ptrdiff_t irow, std::size_t x0,
                                     std::size_t x1, std::size_t widx) {
                      if (gx) {
                        const double wk = wt[widx];
                        for (std::size_t xx = x0; xx < x1; ++xx) gx[irow + static_cast<std::ptrdiff_t>(xx)] += wk * go[orow + xx];
                      }
                      if (gw) {
                        double s = 0.0;
                        for (std::size_t xx = x0; xx < x1; ++xx) s += xi[irow + static_cast<std::ptrdiff_t>(xx)] * go[orow + xx];
                        gw[widx] += s;
                      }
                    });
                    if (b.in_grad[2]) {
                      Tensor& gb = *b.in_grad[2];
                      for (std::size_t bi = 0; bi < batch; ++bi) {
                        for (std::size_t co = 0; co < cout; ++co) {
                          const double* p = go + (bi * cout + co) * h * w;
                          double s = 0.0;
                          for (std::size_t i = 0; i < h * w; ++i) s += p[i];
                          gb[co] += s;
                        }
                      }
                    }
                  });
}

Var add_n(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("add_n: no inputs");
  Graph& g = owner(parts[0]);
  Tensor y = parts[0].value();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    common_owner(parts[0], parts[k]);
    require_same_shape(y, parts[k].value(), "add_n");
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
  }
  return g.record(std::move(y), "add_n", parts, [](const BackwardArgs& b) {
    for (Tensor* gk : b.in_grad) {
      if (!gk) continue;
      for (std::size_t i = 0; i < gk->size(); ++i) (*gk)[i] += b.out_grad[i];
    }
  });
}

}  // namespace dsaml
