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
#include <filesystem>
#include <map>
#include <string>

#include "dsaml/autodiff.hpp"
#include "dsaml/signal.hpp"

namespace dsaml {

// k x D feature matrix for one clip.
struct FeatureSeq {
  Tensor values;
  std::string clip_id;
};

enum class GlobalKind { kStubProjection, kPrecomputed };

struct GlobalExtractorSpec {
  GlobalKind kind = GlobalKind::kStubProjection;
  std::size_t embed_dim = 128;
  std::uint64_t seed = 7;        // stub only
  std::filesystem::path path;    // precomputed only
};

GlobalKind parse_global_kind(const std::string& name);
std::string to_string(GlobalKind kind);

// Frozen clip-level feature backend. Produces one D-vector per clip and tiles
// it over the k time steps. It owns no trainable parameters.
class GlobalExtractor {
 public:
  explicit GlobalExtractor(GlobalExtractorSpec spec);

  const GlobalExtractorSpec& spec() const { return spec_; }
  FeatureSeq features(const MelSequence& mel) const;

 private:
  Tensor clip_vector(const MelSequence& mel) const;

  GlobalExtractorSpec spec_;
  // Stub projections (n_mels x D), built lazily per band count.
  mutable std::map<std::size_t, Tensor> projections_;
  std::map<std::string, Tensor> embeddings_;
};

FeatureSeq global_features(const MelSequence& mel, const GlobalExtractorSpec& spec);

// Reads "clip_id,e0,...,e{D-1}" rows.
std::map<std::string, Tensor> read_embeddings_csv(const std::filesystem::path& path,
                                                  std::size_t embed_dim);
void write_embeddings_csv(const std::filesystem::path& path,
                          const std::map<std::string, Tensor>& rows);

// Convolutional adapter over each segment's frames x n_mels grid:
// conv3x3(1->C) relu, conv3x3(C->C) relu, conv1x1(C->1), flatten, dense to D.
struct AdapterConfig {
  std::size_t frames = 30;
  std::size_t n_mels = 64;
  std::size_t channels = 8;
  std::size_t embed_dim = 128;
};

void init_adapter(ParamSet& params, const AdapterConfig& cfg, Rng& rng);

// mel: [k, frames, n_mels] -> [k, D]
Var adapter_forward(Graph& g, Var mel, const ParamSet& params,
                    const AdapterConfig& cfg);
FeatureSeq adapter_features(const MelSequence& mel, const ParamSet& params,
                            const AdapterConfig& cfg);

// sigmoid(z_l + z_g)
Var fuse(Var z_local, Var z_global);
FeatureSeq fuse(const FeatureSeq& z_local, const FeatureSeq& z_global);

}  // namespace dsaml
