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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dsaml/dataset.hpp"
#include "dsaml/meta.hpp"
#include "dsaml/model.hpp"

namespace dsaml {

double rmse(std::span<const double> pred, std::span<const double> gt);
// Throws NumericError when either series has zero variance.
double pcc(std::span<const double> pred, std::span<const double> gt);
// Both series constant with equal means is 0/0; that returns 0 and sets
// *undefined when given.
double ccc(std::span<const double> pred, std::span<const double> gt, bool* undefined = nullptr);

// Column d of a k x 2 sequence.
std::vector<double> dimension(const VASequence& va, std::size_t d);

// Per-dimension metrics for one pair of sequences ([0] valence, [1] arousal).
std::array<double, 2> rmse(const VASequence& pred, const VASequence& gt);
std::array<double, 2> pcc(const VASequence& pred, const VASequence& gt);
std::array<double, 2> ccc(const VASequence& pred, const VASequence& gt);

struct DimensionReport {
  double rmse = 0.0;
  double pcc = 0.0;
  double ccc = 0.0;
  // Clips left out of the pcc average because a series was constant.
  std::size_t pcc_skipped = 0;
  // Clips whose ccc was 0/0 and counted as 0.
  std::size_t ccc_undefined = 0;
};

// Per-clip metrics, macro-averaged over clips.
struct MetricReport {
  DimensionReport valence;
  DimensionReport arousal;
  std::size_t n_clips = 0;
  std::size_t n_steps = 0;

  const DimensionReport& dim(std::size_t d) const { return d == 0 ? valence : arousal; }
  // Mean of the two dimensions' rmse.
  double mean_rmse() const { return 0.5 * (valence.rmse + arousal.rmse); }
  // "dimension,metric,value" rows.
  void write_csv(const std::filesystem::path& path) const;
  std::string table() const;
};

// Accumulates (prediction, ground truth) pairs into a MetricReport.
class MetricAccumulator {
 public:
  void add(const VASequence& pred, const VASequence& gt);
  MetricReport report() const;

 private:
  struct Sums {
    double rmse = 0.0, pcc = 0.0, ccc = 0.0;
    std::size_t pcc_n = 0, pcc_skipped = 0, ccc_undefined = 0;
  };
  std::array<Sums, 2> sums_;
  std::size_t clips_ = 0;
  std::size_t steps_ = 0;
};

// What evaluation needs from a model: a prediction and a personalization.
struct Predictor {
  std::function<VASequence(const ParamSet&, const MelSequence&)> predict;
  std::function<ParamSet(const ParamSet&, const std::vector<AnnotatedClip>&, const Dataset&)> adapt;
};

// DsamlModel predictions clamped to [-1, 1], adapted with personalize().
Predictor model_predictor(const DsamlModel& model, const MetaConfig& cfg);

// Each clip's prediction scored against its mean label across annotators.
MetricReport evaluate_traditional(const Predictor& predictor, const ParamSet& params,
                                  const Dataset& data);

// Support clip ids per annotator.
using SupportPlan = std::map<std::string, std::vector<std::string>>;

// Picks support_size clips per annotator with a seeded shuffle.
SupportPlan choose_supports(const Dataset& data, std::size_t support_size, std::uint64_t seed);

// For each annotator: adapt on their support clips, then score the remaining
// clips against that annotator's own labels.
MetricReport evaluate_personalized(const Predictor& predictor, const ParamSet& params,
                                   const Dataset& data, const SupportPlan& plan);

struct PopulationSpec {
  std::size_t n_annotators = 8;
  // Every annotator labels the same clips.
  std::size_t clips_per_annotator = 24;
  std::size_t steps = 60;
  std::size_t frames = 30;
  std::size_t n_mels = 64;
  double resolution_hz = 2.0;
  double start_s = 15.0;
  double gain_min = 0.5;
  double gain_max = 1.5;
  double offset_max = 0.3;
  std::size_t max_lag = 2;
  // Standard deviation of the per-cell texture added to the synthetic mel.
  double mel_noise = 0.05;
  std::uint64_t seed = 1;
  std::string clip_prefix = "clip";
  std::string annotator_prefix = "ann";

  void validate() const;
};

struct AnnotatorTransform {
  std::string annotator_id;
  std::array<double, 2> gain{1.0, 1.0};
  std::array<double, 2> offset{0.0, 0.0};
  std::size_t lag = 0;
};

struct Population {
  Dataset data;
  std::map<std::string, VASequence> base;
  std::vector<AnnotatorTransform> transforms;
};

// clip(gain * shift(base, lag) + offset, -1, 1) per dimension, where
// shift delays the curve by lag steps and holds its first value.
VASequence apply_transform(const VASequence& base, const AnnotatorTransform& t);

// Mel band energies of each step are a fixed function of the clip's base
// curve plus seeded texture, so the labels are learnable from the input.
MelSequence synth_mel(const VASequence& base, const PopulationSpec& spec, std::uint64_t seed);

Population synth_population(const PopulationSpec& spec);

}  // namespace dsaml
