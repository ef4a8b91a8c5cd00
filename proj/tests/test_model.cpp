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
#include <cstring>

#include "doctest.h"
#include "dsaml/error.hpp"
#include "dsaml/gradcheck.hpp"
#include "dsaml/model.hpp"
#include "dsaml/optim.hpp"
#include "test_util.hpp"

using namespace dsaml;
using namespace dsaml::testing;

TEST_CASE("predict shape law and determinism") {
  const DsamlModel model(tiny_model_config());
  const ParamSet params = model.init_params(1);
  for (std::size_t k : {1, 2, 7, 60}) {
    const MelSequence mel = random_mel(model.config(), k, k);
    Prediction p = model.predict(mel, params);
    CHECK(p.va.values.shape() == Shape{k, 2});
    CHECK(p.va.values.all_finite());
    CHECK(p.va.start_s == 15.0);
    CHECK(p.local.maps.size() == 2);
    CHECK(p.global.maps.front().size() == 2);
  }
  const MelSequence mel = random_mel(model.config(), 60, 3);
  const Tensor a = model.predict(mel, params).va.values;
  const Tensor b = model.predict(mel, params).va.values;
  CHECK(std::memcmp(a.raw(), b.raw(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("constant input with full masks gives time-invariant transformer features") {
  ModelConfig cfg = tiny_model_config();
  cfg.transformer.n_local = 5;
  cfg.transformer.n_global = 6;
  const DsamlModel model(cfg);
  const ParamSet params = model.init_params(2);
  MelSequence mel;
  mel.segments = Tensor(Shape{5, cfg.frames, cfg.n_mels}, std::log(1e-6));
  Graph g;
  auto fwd = model.forward(g, mel, params);
  const Tensor& z = fwd.dual.fused.value();
  for (std::size_t t = 1; t < 5; ++t) {
    for (std::size_t d = 0; d < z.cols(); ++d) CHECK(z.at(t, d) == doctest::Approx(z.at(0, d)).epsilon(1e-12));
  }
}

TEST_CASE("training_loss values") {
  Graph g;
  auto target_map = [](std::size_t k, double d) {
    Tensor m(Shape{k, k}, (1.0 - d) / static_cast<double>(k - 1));
    for (std::size_t i = 0; i < k; ++i) m.at(i, i) = d;
    return m;
  };
  AttentionRecord local{Scale::kLocal, {{g.constant(target_map(4, 0.5))}}};
  AttentionRecord global{Scale::kGlobal, {{g.constant(target_map(4, 0.05))}}};
  VASequence label = random_label(4, 1);
  CHECK(training_loss(g.constant(label.values), label, local, global, 1.0, 0.5, 0.05).value().item() ==
        doctest::Approx(0.0).epsilon(1e-15));

  Tensor shifted = label.values;
  for (double& v : shifted.values()) v += 0.1;
  CHECK(training_loss(g.constant(shifted), label, local, global, 0.0, 0.5, 0.05).value().item() ==
        doctest::Approx(0.01).epsilon(1e-12));

  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + rng.index(6);
    const double lambda = rng.uniform(0.0, 2.0);
    VASequence y = random_label(k, 100 + trial);
    Tensor pred = random_tensor({k, 2}, rng);
    Tensor al = random_tensor({k, k}, rng, 0.0, 1.0), ag = random_tensor({k, k}, rng, 0.0, 1.0);
    double mse = 0.0, att = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t d = 0; d < 2; ++d) mse += (pred.at(t, d) - y.values.at(t, d)) * (pred.at(t, d) - y.values.at(t, d));
      att += (al.at(t, t) - 0.5) * (al.at(t, t) - 0.5) + (ag.at(t, t) - 0.05) * (ag.at(t, t) - 0.05);
    }
    const double oracle = mse / static_cast<double>(2 * k) + lambda * att / static_cast<double>(k);
    AttentionRecord l{Scale::kLocal, {{g.constant(al)}}}, gl{Scale::kGlobal, {{g.constant(ag)}}};
    CHECK(std::abs(training_loss(g.constant(pred), y, l, gl, lambda, 0.5, 0.05).value().item() - oracle) < 1e-12);
  }
  CHECK_THROWS_AS(training_loss(g.constant(Tensor(Shape{3, 2})), label, local, global, 1.0, 0.5, 0.05),
                  ShapeError);
}

TEST_CASE("every parameter group receives gradient and matches finite differences") {
  // k = 6, D = 8, hidden = 8
  const DsamlModel model(tiny_model_config(8, 8));
  const ParamSet params = model.init_params(4);
  const MelSequence mel = random_mel(model.config(), 6, 5);
  const VASequence label = random_label(6, 6);
  const ParamSet grad = model.loss_and_grad(mel, label, params).grad;
  for (const char* group : {"adapter/", "transformer/", "head/lstm_fwd/", "head/lstm_bwd/", "head/out/"}) {
    INFO(group);
    CHECK(grad.subset(group).max_abs() > 0.0);
  }
  CHECK(grad.size() == params.size());
  auto report = finite_diff_check(
      [&](Graph& g, const ParamSet& p) { return model.loss(model.forward(g, mel, p), label); }, params, 1e-5);
  INFO(report.summary());
  CHECK(report.passes(1e-4));
}

TEST_CASE("a few gradient steps on one pair lower the loss") {
  const DsamlModel model(tiny_model_config());
  ParamSet params = model.init_params(7);
  const MelSequence mel = random_mel(model.config(), 8, 8);
  const VASequence label = random_label(8, 9);
  const double before = model.loss_value(mel, label, params);
  Adam adam({.lr = 0.01});
  for (int step = 0; step < 30; ++step) adam.step(params, model.loss_and_grad(mel, label, params).grad);
  CHECK(model.loss_value(mel, label, params) < 0.5 * before);
}

TEST_CASE("parameters and configuration must agree") {
  const ModelConfig cfg = tiny_model_config();
  const DsamlModel model(cfg);
  const ParamSet params = model.init_params(1);
  CHECK(bitwise_equal(params, model.init_params(1)));
  CHECK_FALSE(bitwise_equal(params, model.init_params(2)));
  CHECK_NOTHROW(model.check_params(params));

  ModelConfig wider = tiny_model_config(12);
  const DsamlModel other(wider);
  try {
    other.check_params(params);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
  }
  ParamSet extra = params.clone();
  extra.set("bogus", Tensor::scalar(1));
  CHECK_THROWS_AS(model.check_params(extra), ShapeError);

  MelSequence wrong;
  wrong.segments = Tensor(Shape{4, cfg.frames + 1, cfg.n_mels});
  CHECK_THROWS_AS(model.predict(wrong, params), ShapeError);

  ModelConfig bad = cfg;
  bad.beta = 0.6;
  CHECK_THROWS_AS(DsamlModel{bad}, ConfigError);
  bad = cfg;
  bad.global.embed_dim = 4;
  CHECK_THROWS_AS(DsamlModel{bad}, ConfigError);
}

TEST_CASE("global features stay frozen") {
  const DsamlModel model(tiny_model_config());
  const ParamSet params = model.init_params(1);
  for (const auto& [name, t] : params) CHECK(name.rfind("global", 0) != 0);
  const auto lg = model.loss_and_grad(random_mel(model.config(), 4, 1), random_label(4, 2), params);
  CHECK(lg.grad.size() == params.size());
}
