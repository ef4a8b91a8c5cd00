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
#include <span>
#include <string>
#include <vector>

#include "dsaml/tensor.hpp"

namespace dsaml {

// Mono PCM in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 0.0;
  std::string clip_id;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct MelConfig {
  double sample_rate = 16000.0;
  std::size_t n_fft = 512;
  std::size_t hop = 256;
  std::size_t n_mels = 64;
  // Segments per second; 2 Hz gives one label every 0.5 s.
  double resolution_hz = 2.0;
  // Leading audio (seconds) discarded before slicing.
  double trim_head_s = 15.0;

  std::size_t window_samples() const;
  std::size_t frames_per_window() const;
  void validate() const;
};

// k x frames x n_mels log-mel grid, one slab per segment.
struct MelSequence {
  Tensor segments;
  double resolution_hz = 2.0;
  double start_s = 0.0;
  std::string clip_id;

  std::size_t steps() const { return segments.rank() == 3 ? segments.dim(0) : 0; }
  std::size_t frames() const { return segments.dim(1); }
  std::size_t n_mels() const { return segments.dim(2); }
};

// Reads 8/16/32-bit integer or 32-bit float PCM WAV (mono or stereo), mixes
// to mono by channel mean and linearly resamples to target_rate. Audio that
// exceeds full scale is peak-normalized back into [-1, 1].
AudioClip load_audio(const std::filesystem::path& path, double target_rate);

// Writes mono 16-bit PCM (bits == 16) or 32-bit float (bits == 32).
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               unsigned sample_rate, unsigned bits = 16, unsigned channels = 1);

std::vector<double> resample_linear(std::span<const double> samples,
                                    double from_rate, double to_rate);

// Drops trim_head_s seconds, then cuts non-overlapping windows of
// sample_rate / resolution_hz samples. The trailing partial window is dropped.
std::vector<std::vector<double>> slice_clip(const AudioClip& clip,
                                            double resolution_hz,
                                            double trim_head_s);

// Triangular HTK-scale filters spanning [0, sample_rate / 2]. Each weight is
// the mean of the triangle over the FFT bin's frequency interval, so narrow
// low-frequency filters still touch at least one bin.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate);

  std::size_t n_mels() const { return n_mels_; }
  std::size_t n_bins() const { return n_bins_; }
  double weight(std::size_t mel, std::size_t bin) const {
    return weights_[mel * n_bins_ + bin];
  }
  double center_hz(std::size_t mel) const { return edges_hz_[mel + 1]; }
  double lower_hz(std::size_t mel) const { return edges_hz_[mel]; }
  double upper_hz(std::size_t mel) const { return edges_hz_[mel + 2]; }
  // Triangle height at frequency f (continuous, not bin-averaged).
  double response(std::size_t mel, double f) const;

  static double hz_to_mel(double hz);
  static double mel_to_hz(double mel);

 private:
  std::size_t n_mels_;
  std::size_t n_bins_;
  std::vector<double> edges_hz_;
  std::vector<double> weights_;
};

// STFT power -> mel filterbank -> log(x + 1e-6). Returns frames x n_mels.
Tensor log_mel(std::span<const double> window, const MelConfig& cfg);

MelSequence preprocess(const AudioClip& clip, const MelConfig& cfg);

// Cache file: u32 k, frames, n_mels, then little-endian f64 payload.
void write_mel_cache(const std::filesystem::path& path, const MelSequence& mel);
MelSequence read_mel_cache(const std::filesystem::path& path,
                           double resolution_hz, double start_s);

}  // namespace dsaml
