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
#include <cstdint>

#include "dsaml/attention.hpp"
#include "dsaml/dataset.hpp"
#include "dsaml/extractor.hpp"

namespace dsaml {

struct ModelConfig {
  // Per-segment input grid.
  std::size_t frames = 30;
  std::size_t n_mels = 64;
  std::size_t adapter_channels = 8;
  std::size_t embed_dim = 128;
  TransformerConfig transformer;
  std::size_t lstm_hidden = 64;
  // Weight of the diagonal attention term in the training loss.
  double loss_lambda = 1.0;
  double alpha = 0.5;
  double beta = 0.05;
  GlobalExtractorSpec global;

  void validate() const;
  AdapterConfig adapter() const {
    return {frames, n_mels, adapter_channels, embed_dim};
  }
};

struct Prediction {
  VASequence va;
  AttentionMaps local;
  AttentionMaps global;
};

struct LossAndGrad {
  double loss = 0.0;
  ParamSet grad;
};

// Full network: adapter + frozen global features, sigmoid fusion, dual-scale
// transformer, bidirectional LSTM, linear V-A head.
class DsamlModel {
 public:
  explicit DsamlModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const GlobalExtractor& global_extractor() const { return global_; }

  ParamSet init_params(std::uint64_t seed) const;
  // Throws ShapeError naming the first parameter whose shape disagrees with
  // the configuration.
  void check_params(const ParamSet& params) const;

  struct Forward {
    Var prediction;  // k x 2
    Var fused_input;  // z
    DualResult dual;
  };
  Forward forward(Graph& g, const MelSequence& mel, const ParamSet& params) const;

  Prediction predict(const MelSequence& mel, const ParamSet& params) const;

  Var loss(const Forward& fwd, const VASequence& label) const;
  LossAndGrad loss_and_grad(const MelSequence& mel, const VASequence& label,
                            const ParamSet& params) const;
  double loss_value(const MelSequence& mel, const VASequence& label,
                    const ParamSet& params) const;

 private:
  ModelConfig cfg_;
  GlobalExtractor global_;
};

// Bidirectional LSTM over rows of x [k, D]; returns [k, 2H].
Var bilstm(Graph& g, Var x, const ParamSet& params, std::size_t hidden);
void init_head(ParamSet& params, std::size_t input_dim, std::size_t hidden, Rng& rng);

// MSE over all k x 2 entries + lambda * attention_loss.
Var training_loss(Var prediction, const VASequence& label, const AttentionRecord& local,
                  const AttentionRecord& global, double lambda, double alpha, double beta);

}  // namespace dsaml
