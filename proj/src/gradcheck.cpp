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
#include "dsaml/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dsaml/error.hpp"

namespace dsaml {
namespace {

// NaN when evaluation itself produced a non-finite value.
double evaluate(const ScalarBuilder& build, const ParamSet& params) {
  try {
    Graph g;
    return build(g, params).value().item();
  } catch (const NumericError&) {
    return std::nan("");
  }
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

bool GradCheckReport::any_non_finite() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return e.non_finite; });
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << e.name << ": max_rel_error=" << e.max_rel_error << " at ["
       << e.worst_index << "] (ad=" << e.analytic << ", fd=" << e.numeric << ")"
       << (e.non_finite ? " NON-FINITE" : "") << '\n';
  }
  return os.str();
}

GradCheckReport finite_diff_check(const ScalarBuilder& build,
                                  const ParamSet& params, double eps) {
  if (!(eps > 0.0)) throw Error("finite_diff_check: eps must be positive");
  GradCheckReport report;
  ParamSet analytic;
  try {
    Graph g;
    Var loss = build(g, params);
    analytic = g.backward(loss);
  } catch (const NumericError&) {
    // nothing to compare against; every parameter is flagged
    for (const auto& [name, value] : params) {
      GradCheckEntry entry;
      entry.name = name;
      entry.non_finite = true;
      report.entries.push_back(entry);
    }
    return report;
  }

  ParamSet probe = params.clone();
  for (const auto& [name, value] : params) {
    GradCheckEntry entry;
    entry.name = name;
    const Tensor* ad = analytic.contains(name) ? &analytic.at(name) : nullptr;
    Tensor& p = probe.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double up = evaluate(build, probe);
      p[i] = saved - eps;
      const double down = evaluate(build, probe);
      p[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double g = ad ? (*ad)[i] : 0.0;
      if (!std::isfinite(fd) || !std::isfinite(g)) {
        entry.non_finite = true;
        continue;
      }
      const double err = relative_error(g, fd);
      if (err >= entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = g;
        entry.numeric = fd;
      }
    }
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace dsaml
