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
#include "dsaml/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dsaml/error.hpp"

namespace dsaml {

GlobalKind parse_global_kind(const std::string& name) {
  if (name == "stub-projection" || name == "stub") return GlobalKind::kStubProjection;
  if (name == "precomputed-file" || name == "precomputed") return GlobalKind::kPrecomputed;
  throw ConfigError("unknown global extractor kind '" + name + "'");
}

std::string to_string(GlobalKind kind) {
  return kind == GlobalKind::kStubProjection ? "stub-projection" : "precomputed-file";
}

GlobalExtractor::GlobalExtractor(GlobalExtractorSpec spec) : spec_(std::move(spec)) {
  if (spec_.embed_dim == 0) throw ConfigError("global extractor: embed_dim must be positive");
  if (spec_.kind == GlobalKind::kPrecomputed) {
    embeddings_ = read_embeddings_csv(spec_.path, spec_.embed_dim);
  }
}

Tensor GlobalExtractor::clip_vector(const MelSequence& mel) const {
  const std::size_t d = spec_.embed_dim;
  if (spec_.kind == GlobalKind::kPrecomputed) {
    auto it = embeddings_.find(mel.clip_id);
    if (it == embeddings_.end()) {
      throw Error("no precomputed embedding for clip '" + mel.clip_id + "'");
    }
    return it->second;
  }
  const std::size_t k = mel.steps(), frames = mel.frames(), bands = mel.n_mels();
  // Time-average over segments and frames, then standardize across bands.
  std::vector<double> avg(bands, 0.0);
  for (std::size_t t = 0; t < k * frames; ++t) {
    for (std::size_t b = 0; b < bands; ++b) avg[b] += mel.segments[t * bands + b];
  }
  double mu = 0.0;
  for (double& v : avg) {
    v /= static_cast<double>(k * frames);
    mu += v;
  }
  mu /= static_cast<double>(bands);
  double var = 0.0;
  for (double v : avg) var += (v - mu) * (v - mu);
  const double inv = 1.0 / (std::sqrt(var / static_cast<double>(bands)) + 1.0);

  auto [it, inserted] = projections_.try_emplace(bands);
  if (inserted) {
    Rng rng(derive_seed(spec_.seed, bands));
    Tensor p(Shape{bands, d});
    const double s = 1.0 / std::sqrt(static_cast<double>(bands));
    for (double& v : p.values()) v = s * rng.normal();
    it->second = std::move(p);
  }
  const Tensor& proj = it->second;
  Tensor out(Shape{d});
  for (std::size_t b = 0; b < bands; ++b) {
    const double x = (avg[b] - mu) * inv;
    for (std::size_t j = 0; j < d; ++j) out[j] += x * proj.at(b, j);
  }
  for (double& v : out.values()) v = std::tanh(v);
  return out;
}

FeatureSeq GlobalExtractor::features(const MelSequence& mel) const {
  if (mel.segments.rank() != 3 || mel.steps() == 0) {
    throw ShapeError("global features: mel sequence must be k x frames x n_mels");
  }
  const Tensor row = clip_vector(mel);
  const std::size_t k = mel.steps(), d = spec_.embed_dim;
  if (row.size() != d) {
    throw ShapeError("global embedding for '" + mel.clip_id + "' has dimension " +
                     std::to_string(row.size()) + ", expected " + std::to_string(d));
  }
  FeatureSeq out{Tensor(Shape{k, d}), mel.clip_id};
  for (std::size_t t = 0; t < k; ++t) {
    std::copy_n(row.raw(), d, out.values.raw() + t * d);
  }
  return out;
}

FeatureSeq global_features(const MelSequence& mel, const GlobalExtractorSpec& spec) {
  return GlobalExtractor(spec).features(mel);
}

std::map<std::string, Tensor> read_embeddings_csv(const std::filesystem::path& path,
                                                  std::size_t embed_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path.string() + "': empty file");
  const auto header_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (line.rfind("clip_id", 0) != 0) {
    throw IoError("'" + path.string() + "': header must start with clip_id");
  }
  if (header_cols != embed_dim) {
    throw ShapeError("'" + path.string() + "': embedding dimension " +
                     std::to_string(header_cols) + " does not match configured D=" +
                     std::to_string(embed_dim));
  }
  std::map<std::string, Tensor> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, cell;
    std::getline(ss, id, ',');
    Tensor row(Shape{embed_dim});
    std::size_t j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= embed_dim) break;
      try {
        row[j++] = std::stod(cell);
      } catch (const std::exception&) {
        throw IoError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": bad number '" + cell + "'");
      }
    }
    if (j != embed_dim || ss.rdbuf()->in_avail() > 0) {
      throw ShapeError("'" + path.string() + "' line " + std::to_string(line_no) +
                       ": expected " + std::to_string(embed_dim) + " values");
    }
    out[id] = std::move(row);
  }
  return out;
}

void write_embeddings_csv(const std::filesystem::path& path,
                          const std::map<std::string, Tensor>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::size_t d = rows.empty() ? 0 : rows.begin()->second.size();
  out << "clip_id";
  for (std::size_t j = 0; j < d; ++j) out << ",e" << j;
  out << '\n' << std::setprecision(17);
  for (const auto& [id, row] : rows) {
    out << id;
    for (double v : row.values()) out << ',' << v;
    out << '\n';
  }
}

void init_adapter(ParamSet& params, const AdapterConfig& cfg, Rng& rng) {
  const std::size_t c = cfg.channels;
  params.set("adapter/conv1/w", glorot_uniform({c, 1, 3, 3}, 9, 9 * c, rng));
  params.set("adapter/conv1/b", Tensor(Shape{c}));
  params.set("adapter/conv2/w", glorot_uniform({c, c, 3, 3}, 9 * c, 9 * c, rng));
  params.set("adapter/conv2/b", Tensor(Shape{c}));
  params.set("adapter/reduce/w", glorot_uniform({1, c, 1, 1}, c, 1, rng));
  params.set("adapter/reduce/b", Tensor(Shape{1}));
  const std::size_t flat = cfg.frames * cfg.n_mels;
  params.set("adapter/dense/w", glorot_uniform({flat, cfg.embed_dim}, flat, cfg.embed_dim, rng));
  params.set("adapter/dense/b", Tensor(Shape{cfg.embed_dim}));
}

Var adapter_forward(Graph& g, Var mel, const ParamSet& params, const AdapterConfig& cfg) {
  const Shape& s = mel.shape();
  if (s.size() != 3 || s[1] != cfg.frames || s[2] != cfg.n_mels) {
    throw ShapeError("adapter: mel segments " + shape_str(s) + " do not match configured " +
                     std::to_string(cfg.frames) + "x" + std::to_string(cfg.n_mels) + " grid");
  }
  Graph::Scope scope(g, "adapter");
  const std::size_t k = s[0];
  Var x = reshape(mel, {k, 1, cfg.frames, cfg.n_mels});
  x = relu(conv2d(x, g.param(params, "adapter/conv1/w"), g.param(params, "adapter/conv1/b")));
  x = relu(conv2d(x, g.param(params, "adapter/conv2/w"), g.param(params, "adapter/conv2/b")));
  x = conv2d(x, g.param(params, "adapter/reduce/w"), g.param(params, "adapter/reduce/b"));
  x = reshape(x, {k, cfg.frames * cfg.n_mels});
  return add_bias(matmul(x, g.param(params, "adapter/dense/w")),
                  g.param(params, "adapter/dense/b"));
}

FeatureSeq adapter_features(const MelSequence& mel, const ParamSet& params,
                            const AdapterConfig& cfg) {
  Graph g;
  Var z = adapter_forward(g, g.constant(mel.segments, "mel"), params, cfg);
  return {z.value(), mel.clip_id};
}

Var fuse(Var z_local, Var z_global) { return sigmoid(z_local + z_global); }

FeatureSeq fuse(const FeatureSeq& z_local, const FeatureSeq& z_global) {
  if (z_local.values.shape() != z_global.values.shape()) {
    throw ShapeError("fuse: " + shape_str(z_local.values.shape()) + " vs " +
                     shape_str(z_global.values.shape()));
  }
  Graph g;
  Var z = fuse(g.constant(z_local.values), g.constant(z_global.values));
  return {z.value(), z_local.clip_id};
}

}  // namespace dsaml
