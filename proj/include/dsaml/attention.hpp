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
#include <string>
#include <vector>

#include "dsaml/autodiff.hpp"

namespace dsaml {

// k x k band matrix: bits[i][j] = 1 iff |i - j| <= context.
struct BandMask {
  std::size_t size = 0;
  std::size_t context = 0;
  Tensor bits;

  bool visible(std::size_t i, std::size_t j) const { return bits.at(i, j) != 0.0; }
};

BandMask band_mask(std::size_t k, std::size_t context);

struct TransformerConfig {
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t model_dim = 128;
  std::size_t ff_dim = 512;
  std::size_t n_local = 5;
  std::size_t n_global = 30;

  // validate() also requires n_local < n_global; dual_forward itself only
  // needs the structural checks.
  void validate() const;
  void validate_structure() const;
};

enum class Scale { kLocal, kGlobal };
std::string to_string(Scale scale);

// Attention maps of one masked pass, maps[layer][head] each k x k.
struct AttentionRecord {
  Scale scale = Scale::kLocal;
  std::vector<std::vector<Var>> maps;

  std::size_t layers() const { return maps.size(); }
  std::size_t heads() const { return maps.empty() ? 0 : maps.front().size(); }
  std::size_t steps() const;
  // Mean over heads and layers.
  Var pooled() const;
};

// Materialized attention maps for export.
struct AttentionMaps {
  Scale scale = Scale::kLocal;
  std::vector<std::vector<Tensor>> maps;
};

AttentionMaps materialize(const AttentionRecord& record);

void init_transformer(ParamSet& params, const TransformerConfig& cfg, Rng& rng);

struct PassResult {
  Var features;
  AttentionRecord record;
};

// Pre-norm transformer stack (multi-head masked self-attention + ReLU
// feed-forward, residual around both) with the given band mask.
PassResult masked_pass(Graph& g, Var z, const BandMask& mask, const ParamSet& params,
                       const TransformerConfig& cfg, Scale which);

struct DualResult {
  Var fused;  // sigmoid(z_l' + z_g')
  Var local_features;
  Var global_features;
  AttentionRecord local;
  AttentionRecord global;
};

// Two passes over the same transformer parameters, one per mask scale.
DualResult dual_forward(Graph& g, Var z, const ParamSet& params,
                        const TransformerConfig& cfg);

// (1/k) sum_i [(diag(A_l)_i - alpha)^2 + (diag(A_g)_i - beta)^2] on the
// head-and-layer averaged map of each scale.
Var attention_loss(const AttentionRecord& local, const AttentionRecord& global,
                   double alpha, double beta);

}  // namespace dsaml
