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
#include "dsaml/program.hpp"

#include "dsaml/error.hpp"

namespace dsaml {

const Tensor& Evaluation::output(const std::string& name) const {
  if (!graph_) throw Error("forward has not run");
  auto it = outputs_.find(name);
  if (it == outputs_.end()) throw Error("unknown output '" + name + "'");
  return it->second.value();
}

std::map<std::string, Tensor> Evaluation::outputs() const {
  if (!graph_) throw Error("forward has not run");
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : outputs_) out.emplace(name, v.value());
  return out;
}

ParamSet Evaluation::backward(const std::string& loss_output) {
  if (!graph_) throw Error("backward before forward: forward has not run");
  auto it = outputs_.find(loss_output);
  if (it == outputs_.end()) throw Error("unknown output '" + loss_output + "'");
  return graph_->backward(it->second);
}

Graph& Evaluation::graph() {
  if (!graph_) throw Error("forward has not run");
  return *graph_;
}

Program::Program(std::map<std::string, Shape> input_shapes, Body body)
    : shapes_(std::move(input_shapes)), body_(std::move(body)) {}

Evaluation Program::forward(const std::map<std::string, Tensor>& inputs,
                            const ParamSet& params) const {
  for (const auto& [name, shape] : shapes_) {
    auto it = inputs.find(name);
    if (it == inputs.end()) throw ShapeError("missing input '" + name + "'");
    if (it->second.shape() != shape) {
      throw ShapeError("input '" + name + "' has shape " +
                       shape_str(it->second.shape()) + ", expected " +
                       shape_str(shape));
    }
  }
  for (const auto& [name, _] : inputs) {
    if (!shapes_.count(name)) throw ShapeError("unexpected input '" + name + "'");
  }
  Evaluation ev;
  ev.graph_ = std::make_unique<Graph>();
  Inputs bound;
  for (const auto& [name, t] : inputs) bound.emplace(name, ev.graph_->constant(t, name));
  ev.outputs_ = body_(*ev.graph_, bound, params);
  return ev;
}

}  // namespace dsaml
