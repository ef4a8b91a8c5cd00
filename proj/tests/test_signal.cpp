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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "dsaml/error.hpp"
#include "dsaml/rng.hpp"
#include "dsaml/signal.hpp"
#include "test_util.hpp"

using namespace dsaml;
using dsaml::testing::scratch_dir;

namespace {

AudioClip tone(double seconds, double rate, double hz, double amp = 0.5) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.clip_id = "tone";
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    clip.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  }
  return clip;
}

AudioClip silence(double seconds, double rate) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.clip_id = "quiet";
  clip.samples.assign(static_cast<std::size_t>(std::llround(seconds * rate)), 0.0);
  return clip;
}

void put(std::ofstream& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Hand-rolled 16-bit stereo WAV writer, independent of write_wav.
void write_stereo16(const std::filesystem::path& path, const std::vector<std::int16_t>& left,
                    const std::vector<std::int16_t>& right, std::uint32_t rate) {
  std::ofstream out(path, std::ios::binary);
  const auto data_len = static_cast<std::uint32_t>(left.size() * 4);
  out.write("RIFF", 4);
  put(out, 36 + data_len, 4);
  out.write("WAVEfmt ", 8);
  put(out, 16, 4);
  put(out, 1, 2);
  put(out, 2, 2);
  put(out, rate, 4);
  put(out, rate * 4, 4);
  put(out, 4, 2);
  put(out, 16, 2);
  out.write("data", 4);
  put(out, data_len, 4);
  for (std::size_t i = 0; i < left.size(); ++i) {
    put(out, static_cast<std::uint16_t>(left[i]), 2);
    put(out, static_cast<std::uint16_t>(right[i]), 2);
  }
}

// Naive DFT magnitude at integer-Hz frequencies of a 1 s signal.
std::size_t dominant_frequency(const std::vector<double>& x, std::size_t max_hz) {
  const std::size_t n = x.size();
  std::vector<double> cos_t(n), sin_t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    cos_t[i] = std::cos(a);
    sin_t[i] = std::sin(a);
  }
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t f = 1; f <= max_hz; ++f) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = (f * i) % n;
      re += x[i] * cos_t[idx];
      im -= x[i] * sin_t[idx];
    }
    const double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best = f;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("slice_clip window counts") {
  CHECK(slice_clip(silence(45.0, 16000), 2.0, 15.0).size() == 60);
  CHECK(slice_clip(silence(30.0, 16000), 2.0, 0.0).size() == 60);
  CHECK_THROWS_AS(slice_clip(silence(15.4, 16000), 2.0, 15.0), Error);
  for (const auto& w : slice_clip(silence(45.0, 16000), 2.0, 15.0)) CHECK(w.size() == 8000);
}

TEST_CASE("slice_clip count bounds the post-trim duration") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const double duration = 1.0 + rng.uniform(0.0, 40.0);
    const double res = rng.uniform() < 0.5 ? 2.0 : 1.0 + rng.index(4);
    const double trim = rng.uniform(0.0, 0.5) * duration;
    const AudioClip clip = silence(duration, 1000);
    const double post = clip.duration() - trim;
    if (post < 1.0 / res) {
      CHECK_THROWS(slice_clip(clip, res, trim));
      continue;
    }
    const auto k = static_cast<double>(slice_clip(clip, res, trim).size());
    CHECK(k / res <= post + 1e-9);
    CHECK(post < (k + 1.0) / res + 1e-9);
  }
}

TEST_CASE("load_audio") {
  const auto dir = scratch_dir("signal_load");
  SUBCASE("16-bit mono at target rate is unchanged") {
    std::vector<double> x(4000);
    Rng rng(1);
    for (double& v : x) v = static_cast<double>(static_cast<int>(rng.index(60000)) - 30000) / 32768.0;
    write_wav(dir / "a.wav", x, 16000, 16);
    AudioClip clip = load_audio(dir / "a.wav", 16000);
    CHECK(clip.clip_id == "a");
    CHECK(clip.sample_rate == 16000);
    REQUIRE(clip.samples.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(clip.samples[i] == x[i]);
  }
  SUBCASE("float WAV round-trips exactly representable samples") {
    std::vector<double> x{0.0, 0.5, -0.25, 0.125, -1.0};
    write_wav(dir / "f.wav", x, 8000, 32);
    AudioClip clip = load_audio(dir / "f.wav", 8000);
    CHECK(clip.samples == x);
  }
  SUBCASE("stereo with opposite channels mixes to silence") {
    std::vector<std::int16_t> left(1000), right(1000);
    for (std::size_t i = 0; i < left.size(); ++i) {
      left[i] = static_cast<std::int16_t>(static_cast<int>(i * 37 % 20000) - 10000);
      right[i] = static_cast<std::int16_t>(-left[i]);
    }
    write_stereo16(dir / "s.wav", left, right, 16000);
    AudioClip clip = load_audio(dir / "s.wav", 16000);
    REQUIRE(clip.samples.size() == 1000);
    for (double v : clip.samples) CHECK(v == 0.0);
  }
  SUBCASE("44.1 kHz sine resamples to 16000 samples peaking at 440 Hz") {
    AudioClip src = tone(1.0, 44100, 440.0);
    write_wav(dir / "t.wav", src.samples, 44100, 32);
    AudioClip clip = load_audio(dir / "t.wav", 16000);
    CHECK(clip.samples.size() == 16000);
    CHECK(dominant_frequency(clip.samples, 8000) == 440);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(load_audio(dir / "missing.wav", 16000), IoError);
    {
      std::ofstream out(dir / "junk.wav", std::ios::binary);
      out << "not a wave file at all";
    }
    CHECK_THROWS_AS(load_audio(dir / "junk.wav", 16000), IoError);
    write_wav(dir / "empty.wav", std::vector<double>{}, 16000, 16);
    CHECK_THROWS_AS(load_audio(dir / "empty.wav", 16000), IoError);
    // 24-bit PCM is not supported
    std::ofstream out(dir / "pcm24.wav", std::ios::binary);
    out.write("RIFF", 4);
    put(out, 36 + 6, 4);
    out.write("WAVEfmt ", 8);
    put(out, 16, 4);
    put(out, 1, 2);
    put(out, 1, 2);
    put(out, 16000, 4);
    put(out, 48000, 4);
    put(out, 3, 2);
    put(out, 24, 2);
    out.write("data", 4);
    put(out, 6, 4);
    put(out, 0, 4);
    put(out, 0, 2);
    out.close();
    CHECK_THROWS_AS(load_audio(dir / "pcm24.wav", 16000), IoError);
  }
}

TEST_CASE("mel filterbank covers the spectrum") {
  MelFilterbank fb(64, 512, 16000);
  for (std::size_t m = 0; m < fb.n_mels(); ++m) {
    double row = 0.0;
    for (std::size_t b = 0; b < fb.n_bins(); ++b) row += fb.weight(m, b);
    CHECK(row > 0.0);
  }
  for (std::size_t b = 0; b < fb.n_bins(); ++b) {
    double col = 0.0;
    for (std::size_t m = 0; m < fb.n_mels(); ++m) col += fb.weight(m, b);
    INFO("bin " << b);
    CHECK(col > 0.0);
  }
  CHECK(fb.lower_hz(0) == 0.0);
  CHECK(fb.upper_hz(63) == doctest::Approx(8000.0));
  // HTK mel scale
  CHECK(MelFilterbank::hz_to_mel(1000.0) == doctest::Approx(2595.0 * std::log10(1.0 + 1000.0 / 700.0)));
  CHECK(MelFilterbank::mel_to_hz(MelFilterbank::hz_to_mel(440.0)) == doctest::Approx(440.0));
}

TEST_CASE("log_mel examples") {
  const MelConfig cfg;
  SUBCASE("silence") {
    Tensor m = log_mel(std::vector<double>(8000, 0.0), cfg);
    CHECK(m.dim(0) == cfg.frames_per_window());
    CHECK(m.dim(1) == 64);
    for (double v : m.values()) CHECK(v == std::log(1e-6));
  }
  SUBCASE("440 Hz tone peaks in the filter with the strongest 440 Hz response") {
    const MelFilterbank fb(cfg.n_mels, cfg.n_fft, cfg.sample_rate);
    std::size_t expected = 0;
    for (std::size_t m = 1; m < fb.n_mels(); ++m) {
      if (fb.response(m, 440.0) > fb.response(expected, 440.0)) expected = m;
    }
    CHECK(fb.lower_hz(expected) < 440.0);
    CHECK(440.0 < fb.upper_hz(expected));
    Tensor m = log_mel(tone(0.5, 16000, 440.0).samples, cfg);
    for (std::size_t f = 0; f < m.dim(0); ++f) {
      std::size_t arg = 0;
      for (std::size_t b = 1; b < m.dim(1); ++b) {
        if (m.at(f, b) > m.at(f, arg)) arg = b;
      }
      INFO("frame " << f);
      CHECK(arg == expected);
    }
  }
  SUBCASE("white noise: same shape, different values") {
    auto noise = [](std::uint64_t seed) {
      Rng rng(seed);
      std::vector<double> x(8000);
      for (double& v : x) v = rng.uniform(-0.5, 0.5);
      return x;
    };
    Tensor a = log_mel(noise(1), cfg), b = log_mel(noise(2), cfg);
    CHECK(a.shape() == b.shape());
    CHECK(a != b);
    CHECK(a.all_finite());
    CHECK(log_mel(noise(1), cfg) == a);
  }
  CHECK_THROWS_AS(log_mel(std::vector<double>(100, 0.0), cfg), ShapeError);
}

TEST_CASE("preprocess") {
  MelConfig cfg;
  cfg.n_mels = 16;
  SUBCASE("45 s clip gives k = 60") {
    MelSequence mel = preprocess(tone(45.0, 16000, 300.0), cfg);
    CHECK(mel.steps() == 60);
    CHECK(mel.frames() == cfg.frames_per_window());
    CHECK(mel.n_mels() == 16);
    CHECK(mel.start_s == 15.0);
    CHECK(mel.segments.all_finite());
  }
  SUBCASE("30 s clip without trim gives k = 60") {
    cfg.trim_head_s = 0.0;
    CHECK(preprocess(tone(30.0, 16000, 300.0), cfg).steps() == 60);
  }
  SUBCASE("silent clip is constant log(1e-6)") {
    MelSequence mel = preprocess(silence(20.0, 16000), cfg);
    CHECK(mel.steps() == 10);
    for (double v : mel.segments.values()) CHECK(v == std::log(1e-6));
  }
  SUBCASE("identical windows give identical grids") {
    cfg.trim_head_s = 0.0;
    AudioClip clip = tone(0.5, 16000, 1000.0);
    const std::vector<double> window = clip.samples;
    for (int rep = 0; rep < 3; ++rep) clip.samples.insert(clip.samples.end(), window.begin(), window.end());
    MelSequence mel = preprocess(clip, cfg);
    const std::size_t slab = mel.frames() * mel.n_mels();
    for (std::size_t t = 1; t < mel.steps(); ++t) {
      for (std::size_t i = 0; i < slab; ++i) {
        CHECK(mel.segments[t * slab + i] == mel.segments[i]);
      }
    }
  }
  SUBCASE("other sample rates are resampled") {
    cfg.trim_head_s = 0.0;
    CHECK(preprocess(tone(3.0, 22050, 500.0), cfg).steps() == 6);
  }
}

TEST_CASE("mel cache round-trips bitwise") {
  const auto dir = scratch_dir("signal_cache");
  Rng rng(9);
  MelSequence mel;
  mel.clip_id = "clip7";
  mel.segments = Tensor(Shape{3, 4, 5});
  for (double& v : mel.segments.values()) v = rng.normal();
  write_mel_cache(dir / "clip7.mel", mel);
  MelSequence back = read_mel_cache(dir / "clip7.mel", 2.0, 15.0);
  CHECK(back.clip_id == "clip7");
  CHECK(back.segments == mel.segments);
  CHECK(back.start_s == 15.0);
  std::ofstream(dir / "bad.mel", std::ios::binary) << "ab";
  CHECK_THROWS_AS(read_mel_cache(dir / "bad.mel", 2.0, 0.0), IoError);
}
