// synth.cc

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

// Source-filter synthesis of a desk-scale speaker corpus.  Each speaker is a
// tuple of resonance (formant-like) center frequencies with bandwidths plus
// a fundamental-frequency range; each utterance drives a jittered pulse
// train through parallel two-pole resonators whose targets drift between
// random per-segment values around the speaker's bases.  The moving targets
// and a syllabic amplitude envelope keep the spectrum non-stationary within
// an utterance, which matters because downstream features are mean
// normalized per band.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "speakerkit/audio.h"
#include "speakerkit/data.h"
#include "speakerkit/wav.h"

namespace speakerkit {

namespace {

constexpr double kFs = 16000.0;

struct SpeakerProfile {
  std::vector<double> formants;    // 3..5 center frequencies, Hz
  std::vector<double> bandwidths;  // Hz, one per formant
  double f0_lo = 0.0, f0_hi = 0.0;
};

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

// Mel-domain distance between two resonance tuples (large constant when the
// formant counts differ -- different spectral shapes are already distinct).
double profile_distance(const SpeakerProfile& a, const SpeakerProfile& b) {
  if (a.formants.size() != b.formants.size()) return 1e9;
  double d = 0.0;
  for (std::size_t k = 0; k < a.formants.size(); ++k)
    d += std::abs(hz_to_mel(a.formants[k]) - hz_to_mel(b.formants[k]));
  return d;
}

SpeakerProfile draw_profile(Rng& rng) {
  // Plausible vowel-like ranges; successive formants stay ordered.
  static const double lo[5] = {320.0, 950.0, 2350.0, 3500.0, 4600.0};
  static const double hi[5] = {880.0, 2250.0, 3350.0, 4500.0, 5600.0};
  std::uniform_int_distribution<int> n_dist(3, 5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SpeakerProfile p;
  const int n = n_dist(rng);
  for (int k = 0; k < n; ++k) {
    p.formants.push_back(lo[k] + (hi[k] - lo[k]) * unif(rng));
    p.bandwidths.push_back(60.0 + 40.0 * k + 50.0 * unif(rng));
  }
  const double base = 85.0 + 160.0 * unif(rng);
  p.f0_lo = base * 0.95;
  p.f0_hi = base * 1.05;
  return p;
}

std::vector<SpeakerProfile> draw_speakers(int n, Rng& rng) {
  std::vector<SpeakerProfile> speakers;
  while (static_cast<int>(speakers.size()) < n) {
    SpeakerProfile cand = draw_profile(rng);
    bool ok = true;
    for (const auto& s : speakers) {
      if (profile_distance(cand, s) < 130.0 ||
          std::abs(cand.f0_lo - s.f0_lo) < 6.0) {
        ok = false;
        break;
      }
    }
    if (ok) speakers.push_back(std::move(cand));
  }
  return speakers;
}

struct Resonator {
  double a1 = 0.0, a2 = 0.0, b0 = 1.0;
  double y1 = 0.0, y2 = 0.0;

  void set(double freq, double bw) {
    const double r = std::exp(-std::numbers::pi * bw / kFs);
    const double theta = 2.0 * std::numbers::pi * freq / kFs;
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    b0 = (1.0 - r) *
         std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
  }

  double step(double x) {
    const double y = b0 * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

std::vector<float> synth_utterance(const SpeakerProfile& spk,
                                   double duration_s, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<std::int64_t>(std::llround(duration_s * kFs));

  const double f0_utt = spk.f0_lo + (spk.f0_hi - spk.f0_lo) * unif(rng);
  const double vib_rate = 4.0 + 3.0 * unif(rng);
  const double vib_depth = 0.01 + 0.02 * unif(rng);
  const double vib_phase = 2.0 * std::numbers::pi * unif(rng);
  const double syl_rate = 2.2 + 1.8 * unif(rng);
  const double syl_phase = 2.0 * std::numbers::pi * unif(rng);

  // Per-segment resonance multipliers and loudness draw a new "vowel"
  // every 0.25..0.6 seconds.
  const int n_formants = static_cast<int>(spk.formants.size());
  struct Segment {
    std::int64_t start;
    std::vector<double> mult;
    double amp;
  };
  std::vector<Segment> segments;
  std::int64_t pos = 0;
  while (pos < n) {
    Segment seg;
    seg.start = pos;
    for (int k = 0; k < n_formants; ++k)
      seg.mult.push_back(0.93 + 0.14 * unif(rng));
    seg.amp = 0.55 + 0.45 * unif(rng);
    segments.push_back(std::move(seg));
    pos += static_cast<std::int64_t>((0.25 + 0.35 * unif(rng)) * kFs);
  }
  segments.push_back({n, std::vector<double>(n_formants, 1.0), 0.8});

  std::vector<Resonator> resonators(n_formants);
  std::vector<double> gains(n_formants);
  for (int k = 0; k < n_formants; ++k) gains[k] = 1.0 / (1.0 + 0.8 * k);

  std::vector<float> out(static_cast<std::size_t>(n), 0.0f);
  std::vector<double> raw(static_cast<std::size_t>(n), 0.0);
  double phase = unif(rng);      // pulse phase accumulator
  double pulse_amp = 1.0;
  double drift = 1.0;
  std::normal_distribution<double> drift_step(0.0, 0.002);
  std::size_t seg_idx = 0;

  for (std::int64_t i = 0; i < n; ++i) {
    if (i % 160 == 0) {
      // 10 ms control update: interpolate formant targets between segments
      // and refresh the resonator coefficients.
      while (seg_idx + 2 < segments.size() && segments[seg_idx + 1].start <= i)
        ++seg_idx;
      const Segment& s0 = segments[seg_idx];
      const Segment& s1 = segments[seg_idx + 1];
      const double span = static_cast<double>(s1.start - s0.start);
      const double frac =
          span > 0 ? std::clamp((i - s0.start) / span, 0.0, 1.0) : 0.0;
      for (int k = 0; k < n_formants; ++k) {
        const double m = s0.mult[k] + frac * (s1.mult[k] - s0.mult[k]);
        resonators[k].set(spk.formants[k] * m, spk.bandwidths[k]);
      }
      drift = std::clamp(drift * (1.0 + drift_step(rng)), 0.92, 1.08);
    }
    const double t = i / kFs;
    const double f0 =
        f0_utt * drift *
        (1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t +
                                    vib_phase));
    phase += f0 / kFs;
    double excitation = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse_amp = 0.9 + 0.2 * unif(rng);
      excitation = pulse_amp;
    }
    excitation += 0.012 * (2.0 * unif(rng) - 1.0);  // aspiration noise

    double sample = 0.0;
    for (int k = 0; k < n_formants; ++k)
      sample += gains[k] * resonators[k].step(excitation);

    while (seg_idx + 2 < segments.size() && segments[seg_idx + 1].start <= i)
      ++seg_idx;
    const double seg_amp = segments[seg_idx].amp;
    const double syl =
        0.35 + 0.65 * 0.5 *
                   (1.0 - std::cos(2.0 * std::numbers::pi * syl_rate * t +
                                   syl_phase));
    raw[static_cast<std::size_t>(i)] = sample * seg_amp * syl;
  }

  double peak = 1e-9;
  for (double v : raw) peak = std::max(peak, std::abs(v));
  const double norm = 0.45 / peak;
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        static_cast<float>(raw[static_cast<std::size_t>(i)] * norm);
  return out;
}

std::uint64_t utt_seed(std::uint64_t base, int spk, int utt) {
  std::uint64_t x = base ^ (0x9E3779B97F4A7C15ull *
                            (static_cast<std::uint64_t>(spk) * 1000 + utt + 1));
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

const char* split_for_index(int utt_index) {
  // Interleaved 70/10/20 pattern, proportional for any utterance count.
  const int m = utt_index % 10;
  if (m < 7) return "train";
  if (m == 7) return "val";
  return "test";
}

}  // namespace

std::vector<ManifestRow> synth_dataset(const SyntheticSpeakerSpec& spec,
                                       const std::string& out_dir) {
  if (spec.n_speakers < 1 || spec.utts_per_speaker < 1 ||
      spec.duration_s <= 0.0) {
    throw ParameterError("synth_dataset: speakers, utterances and duration "
                         "must be positive");
  }
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");

  Rng profile_rng(spec.seed);
  const std::vector<SpeakerProfile> speakers =
      draw_speakers(spec.n_speakers, profile_rng);

  std::vector<ManifestRow> rows;
  char id_buf[64];
  for (int s = 0; s < spec.n_speakers; ++s) {
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      std::snprintf(id_buf, sizeof(id_buf), "spk%02d_utt%03d", s, u);
      const std::string id = id_buf;
      const std::vector<float> samples =
          synth_utterance(speakers[s], spec.duration_s,
                          utt_seed(spec.seed, s, u));
      const std::string rel = "wav/" + id + ".wav";
      write_wav((fs::path(out_dir) / rel).string(), samples,
                audio::kSampleRate);
      std::snprintf(id_buf, sizeof(id_buf), "spk%02d", s);
      rows.push_back({id, rel, id_buf, split_for_index(u),
                      static_cast<double>(samples.size()) / kFs});
    }
  }
  save_manifest((fs::path(out_dir) / "manifest.csv").string(), rows);
  return rows;
}

}  // namespace speakerkit
