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
#include "dsaml/model.hpp"

#include <algorithm>

#include "dsaml/error.hpp"

namespace dsaml {
namespace {

Var lstm_direction(Graph& g, Var x, const ParamSet& params, const std::string& prefix,
                   std::size_t hidden) {
  const std::size_t k = x.shape()[0];
  Var wh = g.param(params, prefix + "/wh");
  Var xw = add_bias(matmul(x, g.param(params, prefix + "/wx")), g.param(params, prefix + "/b"));
  Var h = g.constant(Tensor(Shape{1, hidden}));
  Var c = g.constant(Tensor(Shape{1, hidden}));
  std::vector<Var> outputs;
  outputs.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    Var gates = slice_rows(xw, t, 1) + matmul(h, wh);
    Var i = sigmoid(slice_cols(gates, 0, hidden));
    Var f = sigmoid(slice_cols(gates, hidden, hidden));
    Var cand = tanh(slice_cols(gates, 2 * hidden, hidden));
    Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    c = f * c + i * cand;
    h = o * tanh(c);
    outputs.push_back(h);
  }
  return concat_rows(outputs);
}

}  // namespace

void ModelConfig::validate() const {
  if (frames == 0 || n_mels == 0) throw ConfigError("model: empty input grid");
  if (adapter_channels == 0) throw ConfigError("model: adapter_channels must be positive");
  if (embed_dim == 0) throw ConfigError("model: embed_dim must be positive");
  if (transformer.model_dim != embed_dim) {
    throw ConfigError("model: transformer model_dim " + std::to_string(transformer.model_dim) +
                      " differs from embed_dim " + std::to_string(embed_dim));
  }
  if (global.embed_dim != embed_dim) {
    throw ConfigError("model: global extractor dimension " + std::to_string(global.embed_dim) +
                      " differs from embed_dim " + std::to_string(embed_dim));
  }
  transformer.validate();
  if (lstm_hidden == 0) throw ConfigError("model: lstm_hidden must be positive");
  if (loss_lambda < 0.0) throw ConfigError("model: loss_lambda must be >= 0");
  if (!(0.0 <= beta && beta < alpha && alpha <= 1.0)) {
    throw ConfigError("model: need 0 <= beta < alpha <= 1");
  }
}

Var bilstm(Graph& g, Var x, const ParamSet& params, std::size_t hidden) {
  Graph::Scope scope(g, "bilstm");
  Var fwd = lstm_direction(g, x, params, "head/lstm_fwd", hidden);
  Var bwd = reverse_rows(lstm_direction(g, reverse_rows(x), params, "head/lstm_bwd", hidden));
  return concat_cols({fwd, bwd});
}

void init_head(ParamSet& params, std::size_t input_dim, std::size_t hidden, Rng& rng) {
  for (const char* dir : {"head/lstm_fwd", "head/lstm_bwd"}) {
    const std::string p = dir;
    params.set(p + "/wx", glorot_uniform({input_dim, 4 * hidden}, input_dim, 4 * hidden, rng));
    params.set(p + "/wh", glorot_uniform({hidden, 4 * hidden}, hidden, 4 * hidden, rng));
    params.set(p + "/b", Tensor(Shape{4 * hidden}));
  }
  params.set("head/out/w", glorot_uniform({2 * hidden, 2}, 2 * hidden, 2, rng));
  params.set("head/out/b", Tensor(Shape{2}));
}

Var training_loss(Var prediction, const VASequence& label, const AttentionRecord& local,
                  const AttentionRecord& global, double lambda, double alpha, double beta) {
  if (prediction.shape() != label.values.shape()) {
    throw ShapeError("training_loss: prediction " + shape_str(prediction.shape()) +
                     " vs label " + shape_str(label.values.shape()));
  }
  Graph& g = *prediction.graph();
  Var diff = prediction - g.constant(label.values, "label");
  Var mse = scale(sum_squares(diff), 1.0 / static_cast<double>(label.values.size()));
  if (lambda == 0.0) return mse;
  return mse + scale(attention_loss(local, global, alpha, beta), lambda);
}

DsamlModel::DsamlModel(ModelConfig cfg) : cfg_(std::move(cfg)), global_(cfg_.global) {
  cfg_.validate();
}

ParamSet DsamlModel::init_params(std::uint64_t seed) const {
  ParamSet params(seed);
  Rng adapter_rng(derive_seed(seed, 1));
  Rng transformer_rng(derive_seed(seed, 2));
  Rng head_rng(derive_seed(seed, 3));
  init_adapter(params, cfg_.adapter(), adapter_rng);
  init_transformer(params, cfg_.transformer, transformer_rng);
  init_head(params, cfg_.embed_dim, cfg_.lstm_hidden, head_rng);
  return params;
}

void DsamlModel::check_params(const ParamSet& params) const {
  const ParamSet ref = init_params(0);
  for (const auto& [name, t] : ref) {
    if (!params.contains(name)) {
      throw ShapeError("checkpoint is missing parameter '" + name + "'");
    }
    if (params.at(name).shape() != t.shape()) {
      throw ShapeError("dimension mismatch: checkpoint parameter '" + name + "' has shape " +
                       shape_str(params.at(name).shape()) + " but the model configuration expects " +
                       shape_str(t.shape()));
    }
  }
  for (const auto& [name, _] : params) {
    if (!ref.contains(name)) throw ShapeError("checkpoint has unexpected parameter '" + name + "'");
  }
}

DsamlModel::Forward DsamlModel::forward(Graph& g, const MelSequence& mel,
                                        const ParamSet& params) const {
  if (mel.segments.rank() != 3 || mel.steps() == 0 || mel.frames() != cfg_.frames ||
      mel.n_mels() != cfg_.n_mels) {
    throw ShapeError("mel sequence '" + mel.clip_id + "' has shape " +
                     shape_str(mel.segments.shape()) + ", model expects k x " +
                     std::to_string(cfg_.frames) + " x " + std::to_string(cfg_.n_mels));
  }
  Forward out;
  Var mel_in = g.constant(mel.segments, "mel");
  Var z_local = adapter_forward(g, mel_in, params, cfg_.adapter());
  Var z_global = g.constant(global_.features(mel).values, "z_global");
  out.fused_input = fuse(z_local, z_global);
  out.dual = dual_forward(g, out.fused_input, params, cfg_.transformer);
  Var h = bilstm(g, out.dual.fused, params, cfg_.lstm_hidden);
  Graph::Scope scope(g, "head");
  out.prediction = add_bias(matmul(h, g.param(params, "head/out/w")), g.param(params, "head/out/b"));
  return out;
}

Prediction DsamlModel::predict(const MelSequence& mel, const ParamSet& params) const {
  Graph g;
  Forward fwd = forward(g, mel, params);
  Prediction p;
  p.va = VASequence{fwd.prediction.value(), mel.resolution_hz, mel.start_s, mel.clip_id};
  p.local = materialize(fwd.dual.local);
  p.global = materialize(fwd.dual.global);
  return p;
}

Var DsamlModel::loss(const Forward& fwd, const VASequence& label) const {
  return training_loss(fwd.prediction, label, fwd.dual.local, fwd.dual.global, cfg_.loss_lambda,
                       cfg_.alpha, cfg_.beta);
}

LossAndGrad DsamlModel::loss_and_grad(const MelSequence& mel, const VASequence& label,
                                      const ParamSet& params) const {
  Graph g;
  Var l = loss(forward(g, mel, params), label);
  LossAndGrad out;
  out.loss = l.value().item();
  out.grad = g.backward(l);
  return out;
}

double DsamlModel::loss_value(const MelSequence& mel, const VASequence& label,
                              const ParamSet& params) const {
  Graph g;
  return loss(forward(g, mel, params), label).value().item();
}

}  // namespace dsaml
