// wav.cc

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

#include "speakerkit/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>

#include "speakerkit/errors.h"

namespace speakerkit {

namespace {

struct FileCloser {
  std::FILE* f;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

template <typename T>
bool read_pod(std::FILE* f, T* out) {
  return std::fread(out, sizeof(T), 1, f) == 1;
}

template <typename T>
bool write_pod(std::FILE* f, T v) {
  return std::fwrite(&v, sizeof(T), 1, f) == 1;
}

}  // namespace

audio::Waveform read_wav(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open wav file: " + path);
  FileCloser closer{f};

  char tag[4];
  std::uint32_t riff_size = 0;
  if (std::fread(tag, 1, 4, f) != 4 || std::memcmp(tag, "RIFF", 4) != 0 ||
      !read_pod(f, &riff_size) || std::fread(tag, 1, 4, f) != 4 ||
      std::memcmp(tag, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path);
  }

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t sample_rate = 0, byte_rate = 0;
  bool have_fmt = false;
  audio::Waveform w;

  while (std::fread(tag, 1, 4, f) == 4) {
    std::uint32_t chunk_size = 0;
    if (!read_pod(f, &chunk_size)) throw DataError("truncated wav: " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw DataError("malformed fmt chunk: " + path);
      if (!read_pod(f, &format) || !read_pod(f, &channels) ||
          !read_pod(f, &sample_rate) || !read_pod(f, &byte_rate) ||
          !read_pod(f, &block_align) || !read_pod(f, &bits)) {
        throw DataError("truncated fmt chunk: " + path);
      }
      if (chunk_size > 16) std::fseek(f, chunk_size - 16, SEEK_CUR);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw DataError("wav data before fmt chunk: " + path);
      if (format != 1 || channels != 1 || bits != 16) {
        throw DataError("unsupported wav encoding (need 16-bit PCM mono): " +
                        path);
      }
      const std::size_t n = chunk_size / 2;
      std::vector<std::int16_t> raw(n);
      if (std::fread(raw.data(), 2, n, f) != n) {
        throw DataError("truncated wav data: " + path);
      }
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = static_cast<float>(raw[i]) / 32768.0f;
      w.sample_rate = static_cast<int>(sample_rate);
      return w;
    } else {
      // Skip unrelated chunks (LIST, fact, ...), padded to even size.
      std::fseek(f, chunk_size + (chunk_size & 1), SEEK_CUR);
    }
  }
  throw DataError("wav file has no data chunk: " + path);
}

void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot open wav file for writing: " + path);
  FileCloser closer{f};

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  const std::uint32_t riff_size = 36 + data_bytes;
  const std::uint32_t rate = static_cast<std::uint32_t>(sample_rate);
  bool ok = std::fwrite("RIFF", 1, 4, f) == 4 && write_pod(f, riff_size) &&
            std::fwrite("WAVE", 1, 4, f) == 4 &&
            std::fwrite("fmt ", 1, 4, f) == 4 &&
            write_pod<std::uint32_t>(f, 16) &&    // fmt chunk size
            write_pod<std::uint16_t>(f, 1) &&     // PCM
            write_pod<std::uint16_t>(f, 1) &&     // mono
            write_pod(f, rate) &&
            write_pod<std::uint32_t>(f, rate * 2) &&  // byte rate
            write_pod<std::uint16_t>(f, 2) &&         // block align
            write_pod<std::uint16_t>(f, 16) &&        // bits
            std::fwrite("data", 1, 4, f) == 4 && write_pod(f, data_bytes);
  for (std::size_t i = 0; ok && i < samples.size(); ++i) {
    const float clamped = std::clamp(samples[i], -1.0f, 1.0f);
    const auto v = static_cast<std::int16_t>(std::lrintf(clamped * 32767.0f));
    ok = write_pod(f, v);
  }
  if (!ok) throw DataError("failed writing wav: " + path);
}

}  // namespace speakerkit
