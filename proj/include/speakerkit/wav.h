// speakerkit/wav.h

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

// Minimal RIFF/WAVE IO: 16-bit PCM mono only.

#ifndef SPEAKERKIT_WAV_H_
#define SPEAKERKIT_WAV_H_

#include <string>
#include <vector>

#include "speakerkit/audio.h"

namespace speakerkit {

// Reads a 16-bit PCM mono WAV; DataError for any other encoding.
audio::Waveform read_wav(const std::string& path);

// Writes samples (clamped to [-1, 1]) as 16-bit PCM mono.
void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate);

}  // namespace speakerkit

#endif  // SPEAKERKIT_WAV_H_
