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
#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "dsaml/attention.hpp"
#include "dsaml/error.hpp"
#include "dsaml/gradcheck.hpp"
#include "test_util.hpp"

using namespace dsaml;
using dsaml::testing::random_tensor;

namespace {

TransformerConfig small_config(std::size_t k_local, std::size_t k_global) {
  return {.layers = 2, .heads = 2, .model_dim = 8, .ff_dim = 16, .n_local = k_local, .n_global = k_global};
}

ParamSet transformer_params(const TransformerConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParamSet p;
  init_transformer(p, cfg, rng);
  return p;
}

// Row-stochastic random k x k map.
Tensor random_map(std::size_t k, Rng& rng) {
  Tensor m = random_tensor({k, k}, rng, 0.01, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += m.at(i, j);
    for (std::size_t j = 0; j < k; ++j) m.at(i, j) /= s;
  }
  return m;
}

AttentionRecord record_of(Graph& g, const std::vector<std::vector<Tensor>>& maps, Scale scale) {
  AttentionRecord r;
  r.scale = scale;
  for (const auto& layer : maps) {
    auto& row = r.maps.emplace_back();
    for (const auto& m : layer) row.push_back(g.constant(m));
  }
  return r;
}

}  // namespace

TEST_CASE("band_mask examples") {
  CHECK(band_mask(3, 1).bits == Tensor::matrix(3, 3, {1, 1, 0, 1, 1, 1, 0, 1, 1}));
  CHECK(band_mask(4, 0).bits == Tensor::matrix(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}));
  const BandMask m = band_mask(60, 30);
  CHECK(m.size == 60);
  CHECK(m.context == 30);
}

TEST_CASE("band_mask equals the |i-j| <= n predicate exhaustively") {
  std::size_t mismatches = 0;
  for (std::size_t k = 1; k <= 64; ++k) {
    for (std::size_t n = 0; n <= k; ++n) {
      const BandMask m = band_mask(k, n);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const long d = std::labs(static_cast<long>(i) - static_cast<long>(j));
          const double expect = d <= static_cast<long>(n) ? 1.0 : 0.0;
          if (m.bits.at(i, j) != expect) ++mismatches;
        }
      }
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("masked_pass attention maps") {
  const TransformerConfig cfg = small_config(2, 5);
  const ParamSet p = transformer_params(cfg, 1);
  Rng rng(2);
  SUBCASE("identity band gives one-hot diagonal rows") {
    Graph g;
    auto r = masked_pass(g, g.constant(random_tensor({6, 8}, rng)), band_mask(6, 0), p, cfg, Scale::kLocal);
    for (const auto& layer : materialize(r.record).maps) {
      for (const Tensor& a : layer) {
        for (std::size_t i = 0; i < 6; ++i) {
          for (std::size_t j = 0; j < 6; ++j) CHECK(a.at(i, j) == (i == j ? 1.0 : 0.0));
        }
      }
    }
  }
  SUBCASE("single step gives [[1]]") {
    Graph g;
    auto r = masked_pass(g, g.constant(random_tensor({1, 8}, rng)), band_mask(1, 0), p, cfg, Scale::kGlobal);
    CHECK(r.record.layers() == 2);
    CHECK(r.record.heads() == 2);
    for (const auto& layer : materialize(r.record).maps) {
      for (const Tensor& a : layer) CHECK(a == Tensor::matrix(1, 1, {1.0}));
    }
  }
  SUBCASE("full mask rows sum to one") {
    Graph g;
    auto r = masked_pass(g, g.constant(random_tensor({9, 8}, rng)), band_mask(9, 9), p, cfg, Scale::kGlobal);
    for (const auto& layer : materialize(r.record).maps) {
      for (const Tensor& a : layer) {
        for (std::size_t i = 0; i < 9; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < 9; ++j) s += a.at(i, j);
          CHECK(std::abs(s - 1.0) < 1e-12);
        }
      }
    }
  }
  SUBCASE("dimension mismatches") {
    Graph g;
    CHECK_THROWS_AS(masked_pass(g, g.constant(Tensor(Shape{4, 6})), band_mask(4, 1), p, cfg, Scale::kLocal),
                    ShapeError);
    CHECK_THROWS_AS(masked_pass(g, g.constant(Tensor(Shape{4, 8})), band_mask(5, 1), p, cfg, Scale::kLocal),
                    ShapeError);
  }
}

TEST_CASE("dual_forward") {
  Rng rng(3);
  SUBCASE("identical masks give identical passes") {
    const TransformerConfig cfg = small_config(3, 3);
    const ParamSet p = transformer_params(cfg, 4);
    Graph g;
    DualResult r = dual_forward(g, g.constant(random_tensor({7, 8}, rng)), p, cfg);
    CHECK(r.local_features.value() == r.global_features.value());
    Graph h;
    Var twice = sigmoid(scale(h.constant(r.local_features.value()), 2.0));
    CHECK(r.fused.value() == twice.value());
  }
  SUBCASE("short sequences see everything at both scales") {
    const TransformerConfig cfg = small_config(5, 30);
    const ParamSet p = transformer_params(cfg, 5);
    Graph g;
    DualResult r = dual_forward(g, g.constant(random_tensor({5, 8}, rng)), p, cfg);
    CHECK(r.local_features.value() == r.global_features.value());
  }
  SUBCASE("default contexts: local maps vanish outside the band") {
    TransformerConfig cfg = small_config(5, 30);
    const ParamSet p = transformer_params(cfg, 6);
    Graph g;
    DualResult r = dual_forward(g, g.constant(random_tensor({60, 8}, rng)), p, cfg);
    double outside = 0.0, outside_global = 0.0, row_err = 0.0;
    for (const auto* rec : {&r.local, &r.global}) {
      const std::size_t n = rec == &r.local ? 5 : 30;
      for (const auto& layer : materialize(*rec).maps) {
        for (const Tensor& a : layer) {
          for (std::size_t i = 0; i < 60; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 60; ++j) {
              s += a.at(i, j);
              if (std::labs(static_cast<long>(i) - static_cast<long>(j)) > static_cast<long>(n)) {
                (rec == &r.local ? outside : outside_global) =
                    std::max(rec == &r.local ? outside : outside_global, a.at(i, j));
              }
            }
            row_err = std::max(row_err, std::abs(s - 1.0));
          }
        }
      }
    }
    CHECK(outside < 1e-12);
    CHECK(outside_global < 1e-12);
    CHECK(row_err < 1e-12);
  }
  SUBCASE("both passes share one set of transformer weights") {
    const TransformerConfig cfg = small_config(1, 4);
    const ParamSet p = transformer_params(cfg, 7);
    const Tensor z = random_tensor({6, 8}, rng);
    Graph g;
    DualResult r = dual_forward(g, g.constant(z), p, cfg);
    ParamSet grad = g.backward(sum(r.fused));
    CHECK(grad.size() == p.size());
    for (const auto& [name, t] : grad) CHECK(name.rfind("transformer/layer", 0) == 0);
    // the shared gradient is the sum of what each pass contributes alone
    Graph gl;
    Var zl = gl.constant(z);
    DualResult rl = dual_forward(gl, zl, p, cfg);
    ParamSet only_local = gl.backward(sum(rl.fused * gl.constant(Tensor(Shape{6, 8}, 1.0))));
    CHECK(bitwise_equal(only_local, grad));
    Graph g2;
    PassResult pl = masked_pass(g2, g2.constant(z), band_mask(6, 1), p, cfg, Scale::kLocal);
    ParamSet local_grad = g2.backward(sum(pl.features));
    CHECK(local_grad.max_abs() > 0.0);
    bool differs = false;
    for (const auto& [name, t] : grad) differs = differs || t != local_grad.at(name);
    CHECK(differs);
  }
}

TEST_CASE("attention_loss values") {
  Graph g;
  SUBCASE("single step") {
    const std::vector<std::vector<Tensor>> one{{Tensor::matrix(1, 1, {1.0})}};
    Var loss = attention_loss(record_of(g, one, Scale::kLocal), record_of(g, one, Scale::kGlobal), 0.5, 0.05);
    CHECK(loss.value().item() == doctest::Approx(1.1525).epsilon(1e-15));
  }
  SUBCASE("diagonals at the targets") {
    auto at_target = [](std::size_t k, double d) {
      Tensor m(Shape{k, k}, (1.0 - d) / static_cast<double>(k - 1));
      for (std::size_t i = 0; i < k; ++i) m.at(i, i) = d;
      return m;
    };
    Var loss = attention_loss(record_of(g, {{at_target(5, 0.5)}}, Scale::kLocal),
                              record_of(g, {{at_target(5, 0.05)}}, Scale::kGlobal), 0.5, 0.05);
    CHECK(loss.value().item() == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("random maps match a scalar-loop oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t k = 1 + rng.index(10), layers = 1 + rng.index(3), heads = 1 + rng.index(3);
      std::vector<std::vector<Tensor>> lm(layers), gm(layers);
      for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t h = 0; h < heads; ++h) {
          lm[l].push_back(random_map(k, rng));
          gm[l].push_back(random_map(k, rng));
        }
      }
      double oracle = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        double dl = 0.0, dg = 0.0;
        for (std::size_t l = 0; l < layers; ++l) {
          for (std::size_t h = 0; h < heads; ++h) {
            dl += lm[l][h].at(i, i);
            dg += gm[l][h].at(i, i);
          }
        }
        dl /= static_cast<double>(layers * heads);
        dg /= static_cast<double>(layers * heads);
        oracle += (dl - 0.5) * (dl - 0.5) + (dg - 0.05) * (dg - 0.05);
      }
      oracle /= static_cast<double>(k);
      Var loss = attention_loss(record_of(g, lm, Scale::kLocal), record_of(g, gm, Scale::kGlobal), 0.5, 0.05);
      CHECK(std::abs(loss.value().item() - oracle) < 1e-12);
    }
  }
  SUBCASE("length mismatch") {
    Rng rng(1);
    CHECK_THROWS_AS(attention_loss(record_of(g, {{random_map(3, rng)}}, Scale::kLocal),
                                   record_of(g, {{random_map(4, rng)}}, Scale::kGlobal), 0.5, 0.05),
                    ShapeError);
  }
}

TEST_CASE("attention_loss gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(100 + seed);
    const std::size_t k = 4 + rng.index(5);
    const TransformerConfig cfg{.layers = 2, .heads = 2, .model_dim = 8, .ff_dim = 16, .n_local = 1, .n_global = 3};
    const ParamSet p = transformer_params(cfg, seed);
    const Tensor z = random_tensor({k, 8}, rng);
    auto report = finite_diff_check(
        [&](Graph& g, const ParamSet& ps) {
          DualResult r = dual_forward(g, g.constant(z), ps, cfg);
          return attention_loss(r.local, r.global, 0.5, 0.05);
        },
        p, 1e-5);
    INFO(report.summary());
    CHECK(report.passes(1e-4));
  }
}

TEST_CASE("TransformerConfig validation") {
  TransformerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TransformerConfig{};
  cfg.n_local = cfg.n_global;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(cfg.validate_structure());
}
