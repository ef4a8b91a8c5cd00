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

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "dsaml/autodiff.hpp"

namespace dsaml {

// Result of running a Program: owns the recorded graph so backward() can be
// called on any scalar output afterwards.
class Evaluation {
 public:
  Evaluation() = default;

  bool ran() const noexcept { return graph_ != nullptr; }
  const Tensor& output(const std::string& name) const;
  std::map<std::string, Tensor> outputs() const;
  ParamSet backward(const std::string& loss_output);
  Graph& graph();

 private:
  friend class Program;
  std::unique_ptr<Graph> graph_;
  std::map<std::string, Var> outputs_;
};

// A differentiable computation with declared input names and shapes.
class Program {
 public:
  using Inputs = std::map<std::string, Var>;
  using Outputs = std::map<std::string, Var>;
  using Body = std::function<Outputs(Graph&, const Inputs&, const ParamSet&)>;

  Program(std::map<std::string, Shape> input_shapes, Body body);

  // Validates inputs against the declared leaves and records the graph.
  Evaluation forward(const std::map<std::string, Tensor>& inputs,
                     const ParamSet& params) const;

  const std::map<std::string, Shape>& input_shapes() const { return shapes_; }

 private:
  std::map<std::string, Shape> shapes_;
  Body body_;
};

}  // namespace dsaml
