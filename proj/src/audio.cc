// audio.cc

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

#include "speakerkit/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>

namespace speakerkit {
namespace audio {

namespace {

constexpr int kNumBins = kFftSize / 2 + 1;  // 257

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangle edge frequencies: kNumBands + 2 points uniform on the mel scale
// between 0 and Nyquist.
std::vector<double> filter_edges_hz() {
  std::vector<double> edges(kNumBands + 2);
  const double mel_max = hz_to_mel(kSampleRate / 2.0);
  for (int j = 0; j < kNumBands + 2; ++j)
    edges[j] = mel_to_hz(mel_max * j / (kNumBands + 1));
  return edges;
}

std::vector<double> build_filterbank() {
  const std::vector<double> edges = filter_edges_hz();
  std::vector<double> fb(static_cast<std::size_t>(kNumBands) * kNumBins, 0.0);
  for (int band = 0; band < kNumBands; ++band) {
    const double lo = edges[band], mid = edges[band + 1], hi = edges[band + 2];
    for (int k = 0; k < kNumBins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / kFftSize;
      double w = 0.0;
      if (f >= lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f <= hi) {
        w = (hi - f) / (hi - mid);
      }
      fb[static_cast<std::size_t>(band) * kNumBins + k] = w;
    }
  }
  return fb;
}

const std::vector<double>& hamming_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(kWindowSamples);
    for (int n = 0; n < kWindowSamples; ++n)
      w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n /
                                    kWindowSamples);
    return w;
  }();
  return win;
}

struct Twiddles {
  std::vector<double> cos_tab, sin_tab;
};

const Twiddles& fft_twiddles() {
  static const Twiddles tw = [] {
    Twiddles t;
    t.cos_tab.resize(kFftSize / 2);
    t.sin_tab.resize(kFftSize / 2);
    for (int i = 0; i < kFftSize / 2; ++i) {
      const double ang = -2.0 * std::numbers::pi * i / kFftSize;
      t.cos_tab[i] = std::cos(ang);
      t.sin_tab[i] = std::sin(ang);
    }
    return t;
  }();
  return tw;
}

}  // namespace

void validate(const Waveform& w) {
  if (w.samples.empty()) throw DataError("waveform is empty");
  if (w.sample_rate != kSampleRate) {
    throw DataError("waveform sample rate " + std::to_string(w.sample_rate) +
                    " != required " + std::to_string(kSampleRate));
  }
}

std::int64_t frame_count(std::int64_t num_samples) {
  if (num_samples < kWindowSamples) {
    throw InputTooShortError(
        "signal of " + std::to_string(num_samples) +
        " samples is shorter than one " + std::to_string(kWindowSamples) +
        "-sample window");
  }
  return (num_samples - kWindowSamples) / kHopSamples + 1;
}

std::int64_t frames_for_seconds(double seconds) {
  const auto samples =
      static_cast<std::int64_t>(std::llround(seconds * kSampleRate));
  return frame_count(samples);
}

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  const Twiddles& tw = fft_twiddles();
  const std::size_t full = kFftSize;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = full / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const double wr = tw.cos_tab[k * stride];
        const double wi = tw.sin_tab[k * stride];
        const std::size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * wr - im[b] * wi;
        const double ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
  }
}

std::vector<std::vector<double>> frame_signal(const Waveform& w) {
  validate(w);
  const std::int64_t n = frame_count(static_cast<std::int64_t>(w.samples.size()));
  const std::vector<double>& win = hamming_window();
  std::vector<std::vector<double>> frames(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    auto& frame = frames[static_cast<std::size_t>(i)];
    frame.resize(kWindowSamples);
    const std::int64_t off = i * kHopSamples;
    for (int s = 0; s < kWindowSamples; ++s)
      frame[s] = static_cast<double>(w.samples[off + s]) * win[s];
  }
  return frames;
}

const std::vector<double>& mel_filterbank() {
  static const std::vector<double> fb = build_filterbank();
  return fb;
}

double mel_band_center_hz(int band) {
  static const std::vector<double> edges = filter_edges_hz();
  return edges[band + 1];
}

LogMelSpectrogram log_mel(const Waveform& w) {
  const auto frames = frame_signal(w);
  const std::vector<double>& fb = mel_filterbank();
  LogMelSpectrogram spec;
  spec.num_frames = static_cast<std::int64_t>(frames.size());
  spec.num_bands = kNumBands;
  spec.values.resize(static_cast<std::size_t>(spec.num_frames) * kNumBands);
  std::vector<double> re(kFftSize), im(kFftSize), power(kNumBins);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    std::copy(frames[i].begin(), frames[i].end(), re.begin());
    fft_inplace(re, im);
    for (int k = 0; k < kNumBins; ++k)
      power[k] = re[k] * re[k] + im[k] * im[k];
    for (int band = 0; band < kNumBands; ++band) {
      const double* weights = fb.data() + static_cast<std::size_t>(band) * kNumBins;
      double energy = 0.0;
      for (int k = 0; k < kNumBins; ++k) energy += weights[k] * power[k];
      spec.values[i * kNumBands + band] =
          static_cast<float>(std::log(energy + kLogFloor));
    }
  }
  return spec;
}

LogMelSpectrogram cmn(const LogMelSpectrogram& spec) {
  if (spec.cmn_applied) {
    throw UsageError("cmn: spectrogram is already mean-normalized");
  }
  if (spec.num_frames < 1) throw DataError("cmn: empty spectrogram");
  LogMelSpectrogram out = spec;
  const std::int64_t n = spec.num_frames, m = spec.num_bands;
  for (std::int64_t band = 0; band < m; ++band) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < n; ++i) mean += spec.values[i * m + band];
    mean /= static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i)
      out.values[i * m + band] =
          static_cast<float>(spec.values[i * m + band] - mean);
  }
  out.cmn_applied = true;
  return out;
}

namespace {
constexpr char kCacheMagic[8] = {'S', 'K', 'F', 'E', 'A', 'T', '0', '1'};
}

void save_feature_cache(const std::string& path,
                        const LogMelSpectrogram& spec) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot open feature cache for writing: " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(spec.num_frames);
  const std::uint32_t m = static_cast<std::uint32_t>(spec.num_bands);
  const std::uint32_t flags = spec.cmn_applied ? 1u : 0u;
  bool ok = std::fwrite(kCacheMagic, 1, 8, f) == 8 &&
            std::fwrite(&n, 4, 1, f) == 1 && std::fwrite(&m, 4, 1, f) == 1 &&
            std::fwrite(&flags, 4, 1, f) == 1 &&
            std::fwrite(spec.values.data(), sizeof(float), spec.values.size(),
                        f) == spec.values.size();
  ok = (std::fclose(f) == 0) && ok;
  if (!ok) throw DataError("failed writing feature cache: " + path);
}

LogMelSpectrogram load_feature_cache(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open feature cache: " + path);
  char magic[8];
  std::uint32_t n = 0, m = 0, flags = 0;
  LogMelSpectrogram spec;
  bool ok = std::fread(magic, 1, 8, f) == 8 &&
            std::memcmp(magic, kCacheMagic, 8) == 0 &&
            std::fread(&n, 4, 1, f) == 1 && std::fread(&m, 4, 1, f) == 1 &&
            std::fread(&flags, 4, 1, f) == 1;
  if (ok) {
    spec.num_frames = n;
    spec.num_bands = m;
    spec.cmn_applied = (flags & 1u) != 0;
    spec.values.resize(static_cast<std::size_t>(n) * m);
    ok = std::fread(spec.values.data(), sizeof(float), spec.values.size(),
                    f) == spec.values.size();
  }
  std::fclose(f);
  if (!ok) throw DataError("malformed feature cache: " + path);
  return spec;
}

}  // namespace audio
}  // namespace speakerkit
