// test_audio.cc

// Copyright 2026  Speakerkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>

#include "speakerkit/audio.h"
#include "speakerkit/wav.h"

using namespace speakerkit;
using namespace speakerkit::audio;

namespace {

Waveform tone(double freq, double seconds, float amp = 0.3f) {
  Waveform w;
  const auto n = static_cast<std::int64_t>(seconds * kSampleRate);
  w.samples.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    w.samples[i] = amp * static_cast<float>(
                             std::sin(2.0 * std::numbers::pi * freq * i /
                                      kSampleRate));
  return w;
}

}  // namespace

TEST_CASE("frame count formula") {
  CHECK(frame_count(16000) == 98);   // 1 s
  CHECK(frame_count(400) == 1);      // exactly one window
  CHECK(frame_count(40000) == 248);  // 2.5 s crop length
  CHECK_THROWS_AS(frame_count(399), InputTooShortError);

  CHECK(frames_for_seconds(1.0) == 98);
  CHECK(frames_for_seconds(2.5) == 248);

  // Property: formula equals a naive frame-placement loop.
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int64_t> len_dist(400, 50000);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t len = len_dist(rng);
    std::int64_t naive = 0;
    for (std::int64_t start = 0; start + 400 <= len; start += 160) ++naive;
    CHECK(frame_count(len) == naive);
  }
}

TEST_CASE("waveform validation") {
  Waveform empty;
  CHECK_THROWS_AS(validate(empty), DataError);
  Waveform wrong_rate = tone(440.0, 0.1);
  wrong_rate.sample_rate = 8000;
  CHECK_THROWS_AS(validate(wrong_rate), DataError);
}

TEST_CASE("framing applies a periodic Hamming window") {
  Waveform w;
  w.samples.assign(560, 1.0f);  // two frames of a constant signal
  const auto frames = frame_signal(w);
  REQUIRE(frames.size() == 2);
  // Periodic form: w[n] = 0.54 - 0.46 cos(2 pi n / 400).
  CHECK(frames[0][0] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(frames[0][200] == doctest::Approx(1.0).epsilon(1e-12));
  for (int n = 0; n < 400; n += 37) {
    const double expect =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / 400.0);
    CHECK(frames[1][n] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("fft matches a naive DFT") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> re(kFftSize), im(kFftSize, 0.0);
  for (auto& x : re) x = d(rng);
  const std::vector<double> orig = re;
  fft_inplace(re, im);
  for (int k = 0; k < kFftSize; k += 17) {
    double sr = 0.0, si = 0.0;
    for (int n = 0; n < kFftSize; ++n) {
      const double ang = -2.0 * std::numbers::pi * k * n / kFftSize;
      sr += orig[n] * std::cos(ang);
      si += orig[n] * std::sin(ang);
    }
    CHECK(re[k] == doctest::Approx(sr).epsilon(1e-9));
    CHECK(im[k] == doctest::Approx(si).epsilon(1e-9));
  }
}

TEST_CASE("log_mel of silence is the log floor everywhere") {
  Waveform w;
  w.samples.assign(16000, 0.0f);
  const LogMelSpectrogram spec = log_mel(w);
  CHECK(spec.num_frames == 98);
  CHECK(spec.num_bands == 80);
  const float floor_val = static_cast<float>(std::log(1e-10));
  for (float v : spec.values) CHECK(v == floor_val);
}

TEST_CASE("log_mel width is 80 for any input length") {
  for (double secs : {0.025, 0.5, 1.37}) {
    const LogMelSpectrogram spec = log_mel(tone(500.0, secs));
    CHECK(spec.num_bands == 80);
    CHECK(spec.num_frames ==
          frame_count(static_cast<std::int64_t>(secs * kSampleRate)));
  }
}

TEST_CASE("a pure 1 kHz tone peaks in the band holding 1 kHz") {
  // Independent filterbank-construction oracle: rebuild the triangle edges
  // from the mel formula and find the band with the largest weight at 1 kHz.
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto hz = [](double m) {
    return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
  };
  std::vector<double> edges(82);
  for (int j = 0; j < 82; ++j) edges[j] = hz(mel(8000.0) * j / 81.0);
  int expected = -1;
  double best_w = -1.0;
  for (int band = 0; band < 80; ++band) {
    const double lo = edges[band], mid = edges[band + 1],
                 up = edges[band + 2];
    double wgt = 0.0;
    if (1000.0 >= lo && 1000.0 <= mid) wgt = (1000.0 - lo) / (mid - lo);
    if (1000.0 > mid && 1000.0 <= up) wgt = (up - 1000.0) / (up - mid);
    if (wgt > best_w) {
      best_w = wgt;
      expected = band;
    }
  }
  REQUIRE(expected >= 0);
  CHECK(std::abs(mel_band_center_hz(expected) - 1000.0) < 60.0);

  const LogMelSpectrogram spec = log_mel(tone(1000.0, 0.5));
  for (std::int64_t t = 0; t < spec.num_frames; ++t) {
    int arg = 0;
    for (int b = 1; b < 80; ++b)
      if (spec.at(t, b) > spec.at(t, arg)) arg = b;
    CHECK(arg == expected);
  }
}

TEST_CASE("scaling the waveform shifts log-mel by 2 ln k away from the floor") {
  const Waveform base = tone(850.0, 0.3, 0.2f);
  Waveform scaled = base;
  const double k = 3.0;
  for (auto& s : scaled.samples) s *= static_cast<float>(k);
  const LogMelSpectrogram a = log_mel(base);
  const LogMelSpectrogram b = log_mel(scaled);
  const double shift = 2.0 * std::log(k);
  int checked = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] < std::log(1e-5)) continue;  // near the epsilon floor
    CHECK(static_cast<double>(b.values[i]) - a.values[i] ==
          doctest::Approx(shift).epsilon(1e-4));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("cmn") {
  const LogMelSpectrogram spec = log_mel(tone(700.0, 0.4));
  const LogMelSpectrogram normed = cmn(spec);
  CHECK(normed.cmn_applied);
  // Column means are zero within 1e-5.
  for (int b = 0; b < 80; ++b) {
    double mean = 0.0;
    for (std::int64_t t = 0; t < normed.num_frames; ++t)
      mean += normed.at(t, b);
    CHECK(std::abs(mean / normed.num_frames) < 1e-5);
  }
  // Double application is a usage error.
  CHECK_THROWS_AS(cmn(normed), UsageError);

  // A constant-in-time spectrogram normalizes to all zeros.
  LogMelSpectrogram flat;
  flat.num_frames = 12;
  flat.num_bands = 80;
  flat.values.resize(12 * 80);
  for (std::int64_t t = 0; t < 12; ++t)
    for (int b = 0; b < 80; ++b)
      flat.values[t * 80 + b] = static_cast<float>(b) * 0.25f - 3.0f;
  for (float v : cmn(flat).values) CHECK(v == doctest::Approx(0.0));

  // Adding band-wise constants does not change the result (algebraic
  // oracle on random matrices).
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> d(-5.0f, 5.0f);
  LogMelSpectrogram rand_spec;
  rand_spec.num_frames = 30;
  rand_spec.num_bands = 80;
  rand_spec.values.resize(30 * 80);
  for (auto& v : rand_spec.values) v = d(rng);
  std::vector<float> offsets(80);
  for (auto& v : offsets) v = d(rng);
  LogMelSpectrogram shifted = rand_spec;
  for (std::int64_t t = 0; t < 30; ++t)
    for (int b = 0; b < 80; ++b) shifted.values[t * 80 + b] += offsets[b];
  const LogMelSpectrogram na = cmn(rand_spec);
  const LogMelSpectrogram nb = cmn(shifted);
  for (std::size_t i = 0; i < na.values.size(); ++i)
    CHECK(na.values[i] == doctest::Approx(nb.values[i]).epsilon(1e-4));

  // Idempotent in effect: re-centering already centered columns moves
  // nothing by more than float noise.
  for (int b = 0; b < 80; ++b) {
    double mean = 0.0;
    for (std::int64_t t = 0; t < na.num_frames; ++t) mean += na.at(t, b);
    mean /= na.num_frames;
    CHECK(std::abs(mean) < 1e-6);
  }
}

TEST_CASE("feature cache round-trips bit-exactly") {
  const LogMelSpectrogram spec = cmn(log_mel(tone(450.0, 0.21)));
  const std::string path =
      (std::filesystem::temp_directory_path() / "sk_feat_test.bin").string();
  save_feature_cache(path, spec);
  const LogMelSpectrogram loaded = load_feature_cache(path);
  CHECK(loaded.num_frames == spec.num_frames);
  CHECK(loaded.num_bands == spec.num_bands);
  CHECK(loaded.cmn_applied == spec.cmn_applied);
  CHECK(std::memcmp(loaded.values.data(), spec.values.data(),
                    spec.values.size() * sizeof(float)) == 0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_feature_cache(path), DataError);
}

TEST_CASE("wav io") {
  const Waveform w = tone(330.0, 0.15, 0.5f);
  const std::string path =
      (std::filesystem::temp_directory_path() / "sk_wav_test.wav").string();
  write_wav(path, w.samples, kSampleRate);
  const Waveform r = read_wav(path);
  CHECK(r.sample_rate == kSampleRate);
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); i += 13)
    CHECK(r.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-3));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_wav(path), DataError);
}
