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
#include "dsaml/attention.hpp"

#include <cmath>

#include "dsaml/error.hpp"

namespace dsaml {
namespace {

std::string layer_prefix(std::size_t layer) {
  return "transformer/layer" + std::to_string(layer) + "/";
}

Var linear(Graph& g, Var x, const ParamSet& params, const std::string& name) {
  return add_bias(matmul(x, g.param(params, name + "/w")), g.param(params, name + "/b"));
}

}  // namespace

BandMask band_mask(std::size_t k, std::size_t context) {
  BandMask m{k, context, Tensor(Shape{k, k})};
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t lo = i > context ? i - context : 0;
    const std::size_t hi = std::min(k - 1, i + context);
    for (std::size_t j = lo; j <= hi; ++j) m.bits.at(i, j) = 1.0;
  }
  return m;
}

void TransformerConfig::validate_structure() const {
  if (layers == 0) throw ConfigError("transformer: layers must be positive");
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("transformer: model_dim " + std::to_string(model_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  if (ff_dim == 0) throw ConfigError("transformer: ff_dim must be positive");
}

void TransformerConfig::validate() const {
  validate_structure();
  if (n_local >= n_global) {
    throw ConfigError("transformer: n_local must be smaller than n_global");
  }
}

std::string to_string(Scale scale) { return scale == Scale::kLocal ? "local" : "global"; }

std::size_t AttentionRecord::steps() const {
  if (maps.empty() || maps.front().empty()) return 0;
  return maps.front().front().value().rows();
}

Var AttentionRecord::pooled() const {
  if (maps.empty() || maps.front().empty()) throw Error("empty attention record");
  std::vector<Var> all;
  for (const auto& layer : maps) all.insert(all.end(), layer.begin(), layer.end());
  return dsaml::scale(add_n(all), 1.0 / static_cast<double>(all.size()));
}

AttentionMaps materialize(const AttentionRecord& record) {
  AttentionMaps out{record.scale, {}};
  for (const auto& layer : record.maps) {
    auto& row = out.maps.emplace_back();
    for (Var v : layer) row.push_back(v.value());
  }
  return out;
}

void init_transformer(ParamSet& params, const TransformerConfig& cfg, Rng& rng) {
  cfg.validate_structure();
  const std::size_t d = cfg.model_dim, f = cfg.ff_dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = layer_prefix(l);
    params.set(p + "ln1/gain", Tensor(Shape{d}, 1.0));
    params.set(p + "ln1/bias", Tensor(Shape{d}));
    for (const char* proj : {"attn/q", "attn/k", "attn/v", "attn/o"}) {
      params.set(p + proj + "/w", glorot_uniform({d, d}, d, d, rng));
      params.set(p + proj + "/b", Tensor(Shape{d}));
    }
    params.set(p + "ln2/gain", Tensor(Shape{d}, 1.0));
    params.set(p + "ln2/bias", Tensor(Shape{d}));
    params.set(p + "ff1/w", glorot_uniform({d, f}, d, f, rng));
    params.set(p + "ff1/b", Tensor(Shape{f}));
    params.set(p + "ff2/w", glorot_uniform({f, d}, f, d, rng));
    params.set(p + "ff2/b", Tensor(Shape{d}));
  }
}

PassResult masked_pass(Graph& g, Var z, const BandMask& mask, const ParamSet& params,
                       const TransformerConfig& cfg, Scale which) {
  const Shape& s = z.shape();
  if (s.size() != 2 || s[1] != cfg.model_dim) {
    throw ShapeError("transformer input " + shape_str(s) + " does not match model_dim " +
                     std::to_string(cfg.model_dim));
  }
  if (mask.size != s[0]) {
    throw ShapeError("mask size " + std::to_string(mask.size) + " does not match sequence length " +
                     std::to_string(s[0]));
  }
  Graph::Scope scope(g, "transformer/" + to_string(which));
  const std::size_t dh = cfg.model_dim / cfg.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  PassResult out;
  out.record.scale = which;
  Var x = z;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Graph::Scope layer_scope(g, "layer" + std::to_string(l));
    const std::string p = layer_prefix(l);
    Var h = layer_norm(x, g.param(params, p + "ln1/gain"), g.param(params, p + "ln1/bias"));
    Var q = linear(g, h, params, p + "attn/q");
    Var k = linear(g, h, params, p + "attn/k");
    Var v = linear(g, h, params, p + "attn/v");
    std::vector<Var> heads;
    auto& maps = out.record.maps.emplace_back();
    for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
      Var qh = slice_cols(q, hd * dh, dh);
      Var kh = slice_cols(k, hd * dh, dh);
      Var vh = slice_cols(v, hd * dh, dh);
      Var a = masked_softmax_rows(dsaml::scale(matmul(qh, transpose(kh)), inv_sqrt), mask.bits);
      maps.push_back(a);
      heads.push_back(matmul(a, vh));
    }
    Var attn = heads.size() == 1 ? heads[0] : concat_cols(heads);
    x = x + linear(g, attn, params, p + "attn/o");
    Var h2 = layer_norm(x, g.param(params, p + "ln2/gain"), g.param(params, p + "ln2/bias"));
    x = x + linear(g, relu(linear(g, h2, params, p + "ff1")), params, p + "ff2");
  }
  out.features = x;
  return out;
}

DualResult dual_forward(Graph& g, Var z, const ParamSet& params, const TransformerConfig& cfg) {
  cfg.validate_structure();
  const std::size_t k = z.shape().at(0);
  PassResult local = masked_pass(g, z, band_mask(k, cfg.n_local), params, cfg, Scale::kLocal);
  PassResult global = masked_pass(g, z, band_mask(k, cfg.n_global), params, cfg, Scale::kGlobal);
  DualResult out;
  out.local_features = local.features;
  out.global_features = global.features;
  out.fused = sigmoid(local.features + global.features);
  out.local = std::move(local.record);
  out.global = std::move(global.record);
  return out;
}

Var attention_loss(const AttentionRecord& local, const AttentionRecord& global,
                   double alpha, double beta) {
  const std::size_t k = local.steps();
  if (k == 0 || global.steps() != k) {
    throw ShapeError("attention_loss: local and global maps have different lengths (" +
                     std::to_string(k) + " vs " + std::to_string(global.steps()) + ")");
  }
  Var dl = add_scalar(diag(local.pooled()), -alpha);
  Var dg = add_scalar(diag(global.pooled()), -beta);
  return scale(sum_squares(dl) + sum_squares(dg), 1.0 / static_cast<double>(k));
}

}  // namespace dsaml
