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
#include <string>
#include <vector>

#include "dsaml/autodiff.hpp"

namespace dsaml {

// Builds a scalar loss from a parameter set on a fresh graph.
using ScalarBuilder = std::function<Var(Graph&, const ParamSet&)>;

struct GradCheckEntry {
  std::string name;
  // max over entries of |g_ad - g_fd| / max(|g_ad|, |g_fd|, kGradFloor)
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool non_finite = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const;
  bool any_non_finite() const;
  bool passes(double tolerance) const {
    return !any_non_finite() && max_rel_error() < tolerance;
  }
  std::string summary() const;
};

// Central differences at eps = 1e-5 carry up to ~1e-11 of roundoff for O(1)
// losses. Below this floor gradients are compared absolutely, so a 1e-4
// tolerance means |g_ad - g_fd| < 1e-10 there.
inline constexpr double kGradFloor = 1e-6;

double relative_error(double analytic, double numeric);

// Compares reverse-mode gradients against central differences with step eps
// for every scalar of every parameter.
GradCheckReport finite_diff_check(const ScalarBuilder& build,
                                  const ParamSet& params, double eps = 1e-5);

}  // namespace dsaml
