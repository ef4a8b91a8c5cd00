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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsaml/signal.hpp"

namespace dsaml {

// k x 2 valence/arousal series (column 0 valence, column 1 arousal).
struct VASequence {
  Tensor values;
  double resolution_hz = 2.0;
  double start_s = 0.0;
  std::string clip_id;

  std::size_t steps() const { return values.rank() == 2 ? values.rows() : 0; }
  double valence(std::size_t t) const { return values.at(t, 0); }
  double arousal(std::size_t t) const { return values.at(t, 1); }
  double time_at(std::size_t t) const {
    return start_s + static_cast<double>(t) / resolution_hz;
  }
};

VASequence make_va(std::string clip_id, std::size_t steps, double resolution_hz = 2.0,
                   double start_s = 0.0);

struct AnnotatedClip {
  std::string clip_id;
  std::string annotator_id;
  VASequence label;
};

// Labels plus the model input for every labeled clip.
struct Dataset {
  std::vector<AnnotatedClip> clips;
  std::map<std::string, MelSequence> mels;

  const MelSequence& mel(const std::string& clip_id) const;
  std::vector<std::string> annotators() const;
  std::vector<std::string> clip_ids() const;
  std::vector<AnnotatedClip> by_annotator(const std::string& annotator_id) const;
};

inline constexpr const char* kMeanAnnotator = "mean";

// Per clip, the time-step-wise mean over that clip's annotators. Series of
// unequal length are averaged over their common prefix.
std::vector<AnnotatedClip> mean_labels(const std::vector<AnnotatedClip>& clips);

struct LabelOptions {
  double resolution_hz = 2.0;
  double trim_head_s = 15.0;
};

// Parses "annotator_id,t_seconds,valence,arousal" rows for one clip: drops
// rows before trim_head_s, linearly resamples each annotator onto the
// trim_head_s + j / resolution_hz grid, clips values to [-1, 1].
std::vector<AnnotatedClip> read_label_csv(const std::filesystem::path& path,
                                          const LabelOptions& options);
void write_label_csv(const std::filesystem::path& path,
                     const std::vector<AnnotatedClip>& clips);

// Layout: labels/<clip_id>.csv plus cache/<clip_id>.mel or audio/<clip_id>.wav.
Dataset load_dataset(const std::filesystem::path& dir, const MelConfig& mel_cfg);
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace dsaml
