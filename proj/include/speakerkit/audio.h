// speakerkit/audio.h

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

// 16 kHz waveform -> CMN-normalized 80-band log-Mel spectrogram.
//
// Pipeline constants (documented assumptions, see README):
//   - 25 ms (400 sample) periodic Hamming windows, 10 ms (160 sample) hop,
//     trailing partial frame dropped;
//   - 512-point real FFT (frames zero-padded from 400), power spectrum;
//   - 80 triangular filters on the HTK mel scale spanning 0..8000 Hz;
//   - natural log of (band energy + 1e-10);
//   - CMN = per-utterance, per-band mean subtraction only.

#ifndef SPEAKERKIT_AUDIO_H_
#define SPEAKERKIT_AUDIO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "speakerkit/errors.h"

namespace speakerkit {
namespace audio {

constexpr int kSampleRate = 16000;
constexpr int kWindowSamples = 400;  // 25 ms
constexpr int kHopSamples = 160;     // 10 ms
constexpr int kFftSize = 512;
constexpr int kNumBands = 80;
constexpr double kLogFloor = 1e-10;

struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;
};

// Throws DataError unless the waveform is non-empty 16 kHz audio.
void validate(const Waveform& w);

struct LogMelSpectrogram {
  std::int64_t num_frames = 0;
  std::int64_t num_bands = kNumBands;
  std::vector<float> values;  // row-major [num_frames, num_bands]
  bool cmn_applied = false;

  float at(std::int64_t frame, std::int64_t band) const {
    return values[frame * num_bands + band];
  }
};

// floor((len - 400) / 160) + 1; InputTooShortError below one window.
std::int64_t frame_count(std::int64_t num_samples);

// Frame count of an audio crop of the given duration.
std::int64_t frames_for_seconds(double seconds);

// Periodic (alpha = 0.54) Hamming-windowed frames of 400 samples each.
std::vector<std::vector<double>> frame_signal(const Waveform& w);

// Log-mel feature matrix, no CMN yet.
LogMelSpectrogram log_mel(const Waveform& w);

// Per-band mean subtraction; UsageError if already applied.
LogMelSpectrogram cmn(const LogMelSpectrogram& spec);

// The 80 x 257 triangular filterbank, row-major.  Exposed so tests can
// locate band centers.
const std::vector<double>& mel_filterbank();

// Center frequency (Hz) of a mel band's triangle peak.
double mel_band_center_hz(int band);

// Bit-exact feature cache, one file per utterance.
void save_feature_cache(const std::string& path,
                        const LogMelSpectrogram& spec);
LogMelSpectrogram load_feature_cache(const std::string& path);

// In-place radix-2 complex FFT; size must be a power of two.  Exposed for
// the naive-DFT cross-check in the tests.
void fft_inplace(std::vector<double>& re, std::vector<double>& im);

}  // namespace audio
}  // namespace speakerkit

#endif  // SPEAKERKIT_AUDIO_H_
