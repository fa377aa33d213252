// speakerkit/data.h

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

// Dataset plumbing: manifest IO, the deterministic synthetic-speaker corpus
// generator, trial-list construction, and embedding file IO.

#ifndef SPEAKERKIT_DATA_H_
#define SPEAKERKIT_DATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "speakerkit/errors.h"
#include "speakerkit/evaluation.h"

namespace speakerkit {

struct ManifestRow {
  std::string utterance_id;
  std::string audio_path;
  std::string label;
  std::string split;  // train | val | test
  double duration_s = 0.0;
};

// CSV with header `utterance_id,audio_path,label,split,duration_s`.
// Rows shorter than min_duration_s are dropped.  Malformed rows raise
// ParseError naming the line; duplicate ids raise DataError.
std::vector<ManifestRow> load_manifest(const std::string& path,
                                       double min_duration_s = 0.0);
void save_manifest(const std::string& path,
                   const std::vector<ManifestRow>& rows);

std::vector<ManifestRow> filter_split(const std::vector<ManifestRow>& rows,
                                      const std::string& split);

// Relative audio paths in a manifest resolve against the manifest's
// directory.
std::string resolve_audio_path(const std::string& manifest_path,
                               const ManifestRow& row);

// Sorted distinct labels -> class indices (the label map written next to
// training runs).
std::vector<std::string> label_set(const std::vector<ManifestRow>& rows);

// A synthetic speaker is a set of formant-like resonances plus a fundamental
// frequency range; utterances are pulse trains shaped by slowly moving
// resonance targets with additive noise, so the spectrum varies over time
// within an utterance but stays characteristic of the speaker.
struct SyntheticSpeakerSpec {
  int n_speakers = 10;
  int utts_per_speaker = 20;
  double duration_s = 3.0;
  std::uint64_t seed = 42;
};

// Generates WAVs under out_dir plus the manifest rows (70/10/20 per-speaker
// splits).  A fixed seed yields a byte-identical corpus.
std::vector<ManifestRow> synth_dataset(const SyntheticSpeakerSpec& spec,
                                       const std::string& out_dir);

// Builds a verification trial list over one split: up to n_target
// same-label pairs (all of them if fewer exist) and n_nontarget
// different-label pairs, deterministically from the seed.  DataError when
// the split cannot produce both kinds.
std::vector<Trial> make_trials(const std::vector<ManifestRow>& rows,
                               const std::string& split, int n_target,
                               int n_nontarget, std::uint64_t seed);

// Embedding file: per utterance `u32 id_len, id bytes, u32 dim, f32 data`.
using EmbeddingList = std::vector<std::pair<std::string, std::vector<float>>>;
void save_embeddings(const std::string& path, const EmbeddingList& embs);
EmbeddingList load_embeddings(const std::string& path);

}  // namespace speakerkit

#endif  // SPEAKERKIT_DATA_H_
