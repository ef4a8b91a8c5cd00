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
#include "dsaml/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "dsaml/error.hpp"

namespace dsaml {
namespace {

constexpr double kLogFloor = 1e-6;

std::uint32_t read_le(const unsigned char* p, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

void put_le(std::ostream& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct FftwDeleter {
  void operator()(double* p) const { fftw_free(p); }
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

// Plans are created once per size; planner calls are not thread-safe.
fftw_plan plan_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(n / 2 + 1));
  fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(),
                                     FFTW_ESTIMATE);
  plans.emplace(n, p);
  return p;
}

const MelFilterbank& filterbank_for(const MelConfig& cfg) {
  static std::mutex mu;
  static std::map<std::tuple<std::size_t, std::size_t, double>,
                  std::unique_ptr<MelFilterbank>>
      cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(cfg.n_mels, cfg.n_fft, cfg.sample_rate);
  auto& slot = cache[key];
  if (!slot) slot = std::make_unique<MelFilterbank>(cfg.n_mels, cfg.n_fft, cfg.sample_rate);
  return *slot;
}

// Integral over [a, b] of the rising ramp (f - lo) / (c - lo) on [lo, c].
double ramp_up_integral(double a, double b, double lo, double c) {
  a = std::max(a, lo);
  b = std::min(b, c);
  if (b <= a) return 0.0;
  const double w = c - lo;
  return ((b - lo) * (b - lo) - (a - lo) * (a - lo)) / (2.0 * w);
}

// Integral over [a, b] of the falling ramp (hi - f) / (hi - c) on [c, hi].
double ramp_down_integral(double a, double b, double c, double hi) {
  a = std::max(a, c);
  b = std::min(b, hi);
  if (b <= a) return 0.0;
  const double w = hi - c;
  return ((hi - a) * (hi - a) - (hi - b) * (hi - b)) / (2.0 * w);
}

}  // namespace

std::size_t MelConfig::window_samples() const {
  return static_cast<std::size_t>(std::llround(sample_rate / resolution_hz));
}

std::size_t MelConfig::frames_per_window() const {
  const std::size_t w = window_samples();
  if (w < n_fft) return 0;
  return 1 + (w - n_fft) / hop;
}

void MelConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("mel: sample_rate must be positive");
  if (n_fft < 2) throw ConfigError("mel: n_fft must be at least 2");
  if (hop == 0) throw ConfigError("mel: hop must be positive");
  if (n_mels == 0) throw ConfigError("mel: n_mels must be positive");
  if (!(resolution_hz > 0.0)) throw ConfigError("mel: resolution_hz must be positive");
  if (trim_head_s < 0.0) throw ConfigError("mel: trim_head_s must be >= 0");
  if (window_samples() < n_fft) {
    throw ConfigError("mel: segment window (" + std::to_string(window_samples()) +
                      " samples) shorter than n_fft");
  }
}

AudioClip load_audio(const std::filesystem::path& path, double target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("'" + name + "' is not a RIFF/WAVE file");
  }
  std::uint32_t format = 0, channels = 0, rate = 0, bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::size_t len = read_le(hdr + 4, 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(len, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw IoError("'" + name + "': truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_le(f, 2);
      channels = read_le(f + 2, 2);
      rate = read_le(f + 4, 4);
      bits = read_le(f + 14, 2);
      if (format == 0xFFFE && avail >= 26) format = read_le(f + 24, 2);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = avail;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt || !data) throw IoError("'" + name + "': missing fmt or data chunk");
  if (channels < 1 || channels > 2) {
    throw IoError("'" + name + "': unsupported channel count " + std::to_string(channels));
  }
  if (rate == 0) throw IoError("'" + name + "': zero sample rate");
  const bool is_int = format == 1 && (bits == 8 || bits == 16 || bits == 32);
  const bool is_float = format == 3 && bits == 32;
  if (!is_int && !is_float) {
    throw IoError("'" + name + "': unsupported encoding (format " +
                  std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }
  const std::size_t bytes_per = bits / 8;
  const std::size_t frames = data_len / (bytes_per * channels);
  if (frames == 0) throw IoError("'" + name + "': zero-length audio");

  auto sample_at = [&](std::size_t idx) -> double {
    const unsigned char* p = data + idx * bytes_per;
    if (is_float) return static_cast<double>(std::bit_cast<float>(read_le(p, 4)));
    switch (bits) {
      case 8:
        return (static_cast<double>(p[0]) - 128.0) / 128.0;
      case 16:
        return static_cast<double>(static_cast<std::int16_t>(read_le(p, 2))) / 32768.0;
      default:
        return static_cast<double>(static_cast<std::int32_t>(read_le(p, 4))) / 2147483648.0;
    }
  };

  std::vector<double> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < channels; ++c) s += sample_at(i * channels + c);
    mono[i] = s / static_cast<double>(channels);
  }
  AudioClip clip;
  clip.clip_id = path.stem().string();
  clip.samples = resample_linear(mono, static_cast<double>(rate), target_rate);
  clip.sample_rate = target_rate;
  if (clip.samples.empty()) throw IoError("'" + name + "': zero-length audio");
  double peak = 0.0;
  for (double v : clip.samples) {
    if (!std::isfinite(v)) throw IoError("'" + name + "': non-finite samples");
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 1.0) {
    for (double& v : clip.samples) v /= peak;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               unsigned sample_rate, unsigned bits, unsigned channels) {
  if (bits != 16 && bits != 32) throw IoError("write_wav: bits must be 16 or 32");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::uint32_t bytes_per = bits / 8;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(samples.size() * bytes_per * channels);
  out.write("RIFF", 4);
  put_le(out, 36 + data_len, 4);
  out.write("WAVEfmt ", 8);
  put_le(out, 16, 4);
  put_le(out, bits == 32 ? 3 : 1, 2);
  put_le(out, channels, 2);
  put_le(out, sample_rate, 4);
  put_le(out, sample_rate * bytes_per * channels, 4);
  put_le(out, bytes_per * channels, 2);
  put_le(out, bits, 2);
  out.write("data", 4);
  put_le(out, data_len, 4);
  for (double s : samples) {
    for (unsigned c = 0; c < channels; ++c) {
      if (bits == 32) {
        put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)), 4);
      } else {
        const double clamped = std::clamp(s, -1.0, 32767.0 / 32768.0);
        const auto v = static_cast<std::int16_t>(std::lround(clamped * 32768.0));
        put_le(out, static_cast<std::uint16_t>(v), 2);
      }
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<double> resample_linear(std::span<const double> samples,
                                    double from_rate, double to_rate) {
  if (!(from_rate > 0.0) || !(to_rate > 0.0)) {
    throw ConfigError("resample: rates must be positive");
  }
  if (from_rate == to_rate) return {samples.begin(), samples.end()};
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(samples.size()) * to_rate / from_rate));
  std::vector<double> out(n_out);
  const double step = from_rate / to_rate;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto j = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(j);
    const double a = samples[std::min(j, samples.size() - 1)];
    const double b = samples[std::min(j + 1, samples.size() - 1)];
    out[i] = a + (b - a) * frac;
  }
  return out;
}

std::vector<std::vector<double>> slice_clip(const AudioClip& clip,
                                            double resolution_hz,
                                            double trim_head_s) {
  if (!(resolution_hz > 0.0)) throw ConfigError("slice_clip: resolution must be positive");
  if (!(clip.sample_rate > 0.0)) throw ConfigError("slice_clip: invalid sample rate");
  const auto trim = static_cast<std::size_t>(std::llround(trim_head_s * clip.sample_rate));
  const auto window = static_cast<std::size_t>(std::llround(clip.sample_rate / resolution_hz));
  const std::size_t available = clip.samples.size() > trim ? clip.samples.size() - trim : 0;
  const std::size_t k = window ? available / window : 0;
  if (k == 0) {
    throw Error("clip '" + clip.clip_id + "' too short: " +
                std::to_string(static_cast<double>(available) / clip.sample_rate) +
                " s after trimming " + std::to_string(trim_head_s) +
                " s, need at least one " + std::to_string(1.0 / resolution_hz) +
                " s window");
  }
  std::vector<std::vector<double>> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(trim + i * window);
    out[i].assign(first, first + static_cast<std::ptrdiff_t>(window));
  }
  return out;
}

MelFilterbank::MelFilterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate)
    : n_mels_(n_mels), n_bins_(n_fft / 2 + 1) {
  if (n_mels == 0 || n_fft < 2 || !(sample_rate > 0.0)) {
    throw ConfigError("invalid mel filterbank configuration");
  }
  const double nyquist = sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);
  edges_hz_.resize(n_mels + 2);
  for (std::size_t i = 0; i < edges_hz_.size(); ++i) {
    edges_hz_[i] = mel_to_hz(mel_hi * static_cast<double>(i) /
                             static_cast<double>(n_mels + 1));
  }
  edges_hz_.front() = 0.0;
  edges_hz_.back() = nyquist;

  const double bin_hz = sample_rate / static_cast<double>(n_fft);
  weights_.assign(n_mels * n_bins_, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges_hz_[m], c = edges_hz_[m + 1], hi = edges_hz_[m + 2];
    for (std::size_t b = 0; b < n_bins_; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      const double a = f - bin_hz / 2.0, z = f + bin_hz / 2.0;
      const double area = ramp_up_integral(a, z, lo, c) + ramp_down_integral(a, z, c, hi);
      weights_[m * n_bins_ + b] = area / bin_hz;
    }
  }
}

double MelFilterbank::response(std::size_t mel, double f) const {
  const double lo = lower_hz(mel), c = center_hz(mel), hi = upper_hz(mel);
  if (f <= lo || f >= hi) return 0.0;
  return f <= c ? (f - lo) / (c - lo) : (hi - f) / (hi - c);
}

double MelFilterbank::hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelFilterbank::mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Tensor log_mel(std::span<const double> window, const MelConfig& cfg) {
  if (window.size() < cfg.n_fft) {
    throw ShapeError("log_mel: window of " + std::to_string(window.size()) +
                     " samples is shorter than n_fft=" + std::to_string(cfg.n_fft));
  }
  if (cfg.hop == 0) throw ConfigError("log_mel: hop must be positive");
  const std::size_t n = cfg.n_fft;
  const std::size_t frames = 1 + (window.size() - n) / cfg.hop;
  const MelFilterbank& bank = filterbank_for(cfg);
  const std::size_t bins = bank.n_bins();

  std::vector<double> hann(n);
  for (std::size_t i = 0; i < n; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
  }
  fftw_plan plan = plan_for(n);
  std::unique_ptr<double, FftwDeleter> buf(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwDeleter> spec(fftw_alloc_complex(bins));
  std::vector<double> power(bins);

  Tensor out(Shape{frames, cfg.n_mels});
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t off = t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) buf.get()[i] = window[off + i] * hann[i];
    fftw_execute_dft_r2c(plan, buf.get(), spec.get());
    for (std::size_t b = 0; b < bins; ++b) {
      const double re = spec.get()[b][0], im = spec.get()[b][1];
      power[b] = re * re + im * im;
    }
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t b = 0; b < bins; ++b) e += bank.weight(m, b) * power[b];
      out.at(t, m) = std::log(e + kLogFloor);
    }
  }
  return out;
}

MelSequence preprocess(const AudioClip& clip, const MelConfig& cfg) {
  cfg.validate();
  AudioClip working = clip;
  if (clip.sample_rate != cfg.sample_rate) {
    working.samples = resample_linear(clip.samples, clip.sample_rate, cfg.sample_rate);
    working.sample_rate = cfg.sample_rate;
  }
  const auto windows = slice_clip(working, cfg.resolution_hz, cfg.trim_head_s);
  const std::size_t frames = cfg.frames_per_window();
  MelSequence mel;
  mel.clip_id = clip.clip_id;
  mel.resolution_hz = cfg.resolution_hz;
  mel.start_s = cfg.trim_head_s;
  mel.segments = Tensor(Shape{windows.size(), frames, cfg.n_mels});
  const std::size_t slab = frames * cfg.n_mels;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    Tensor grid = log_mel(windows[i], cfg);
    std::copy_n(grid.raw(), slab, mel.segments.raw() + i * slab);
  }
  return mel;
}

void write_mel_cache(const std::filesystem::path& path, const MelSequence& mel) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  put_le(out, static_cast<std::uint32_t>(mel.steps()), 4);
  put_le(out, static_cast<std::uint32_t>(mel.frames()), 4);
  put_le(out, static_cast<std::uint32_t>(mel.n_mels()), 4);
  for (double v : mel.segments.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

MelSequence read_mel_cache(const std::filesystem::path& path, double resolution_hz,
                           double start_s) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mel cache '" + path.string() + "'");
  unsigned char hdr[12];
  if (!in.read(reinterpret_cast<char*>(hdr), 12)) {
    throw IoError("'" + path.string() + "': truncated mel cache header");
  }
  const std::size_t k = read_le(hdr, 4), frames = read_le(hdr + 4, 4),
                    mels = read_le(hdr + 8, 4);
  if (k == 0 || frames == 0 || mels == 0) {
    throw IoError("'" + path.string() + "': empty mel cache");
  }
  MelSequence mel;
  mel.clip_id = path.stem().string();
  mel.resolution_hz = resolution_hz;
  mel.start_s = start_s;
  mel.segments = Tensor(Shape{k, frames, mels});
  unsigned char b[8];
  for (double& v : mel.segments.values()) {
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
      throw IoError("'" + path.string() + "': truncated mel cache payload");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  if (!mel.segments.all_finite()) {
    throw IoError("'" + path.string() + "': non-finite mel values");
  }
  return mel;
}

}  // namespace dsaml
