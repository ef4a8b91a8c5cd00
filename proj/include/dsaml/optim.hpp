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

#include <cstdint>

#include "dsaml/params.hpp"

namespace dsaml {

// In-place params -= lr * grads.
void sgd_step(ParamSet& params, const ParamSet& grads, double lr);

class Adam {
 public:
  struct Options {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(Options options) : opt_(options) {}

  void step(ParamSet& params, const ParamSet& grads);
  std::uint64_t steps() const noexcept { return t_; }
  const Options& options() const noexcept { return opt_; }

 private:
  Options opt_;
  ParamSet m_;
  ParamSet v_;
  std::uint64_t t_ = 0;
};

}  // namespace dsaml
