// speakerkit/checkpoint.h

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

// Checkpoint container: a flat little-endian archive of named arrays
// (parameters plus batch-norm running statistics) with the architecture
// config embedded as text and guarded by a hash.  Round-trips bit-exactly.
//
// Layout: magic "SKCKPT01" | u32 scalar size | u64 config hash |
// u32 config length | config text | u32 entry count | entries, each
// u32 name length | name | u32 ndim | u64 dims... | raw data.

#ifndef SPEAKERKIT_CHECKPOINT_H_
#define SPEAKERKIT_CHECKPOINT_H_

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "speakerkit/errors.h"
#include "speakerkit/model.h"

namespace speakerkit {

// Implemented in config.cc (shared with run configs).
class KeyValues;
ModelConfig model_config_from(const KeyValues& kv);

namespace ckpt_detail {

constexpr char kMagic[8] = {'S', 'K', 'C', 'K', 'P', 'T', '0', '1'};

struct Entry {
  std::string name;
  Shape shape;
  const void* data;
  std::size_t bytes;
};

inline void write_u32(std::FILE* f, std::uint32_t v, bool& ok) {
  ok = ok && std::fwrite(&v, 4, 1, f) == 1;
}
inline void write_u64(std::FILE* f, std::uint64_t v, bool& ok) {
  ok = ok && std::fwrite(&v, 8, 1, f) == 1;
}
inline bool read_u32(std::FILE* f, std::uint32_t* v) {
  return std::fread(v, 4, 1, f) == 1;
}
inline bool read_u64(std::FILE* f, std::uint64_t* v) {
  return std::fread(v, 8, 1, f) == 1;
}

}  // namespace ckpt_detail

template <typename T>
void save_checkpoint(const std::string& path, SpeakerNet<T>& net) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write checkpoint: " + path);
  const std::string config_text = net.config().serialize();
  bool ok = std::fwrite(ckpt_detail::kMagic, 1, 8, f) == 8;
  ckpt_detail::write_u32(f, static_cast<std::uint32_t>(sizeof(T)), ok);
  ckpt_detail::write_u64(f, net.config().hash(), ok);
  ckpt_detail::write_u32(f, static_cast<std::uint32_t>(config_text.size()),
                         ok);
  ok = ok && std::fwrite(config_text.data(), 1, config_text.size(), f) ==
                 config_text.size();
  const auto& params = net.parameters();
  auto buffers = net.buffers();
  ckpt_detail::write_u32(
      f, static_cast<std::uint32_t>(params.size() + buffers.size()), ok);
  auto write_entry = [&](const std::string& name, const Shape& shape,
                         const std::vector<T>& data) {
    ckpt_detail::write_u32(f, static_cast<std::uint32_t>(name.size()), ok);
    ok = ok && std::fwrite(name.data(), 1, name.size(), f) == name.size();
    ckpt_detail::write_u32(f, static_cast<std::uint32_t>(shape.size()), ok);
    for (std::int64_t d : shape)
      ckpt_detail::write_u64(f, static_cast<std::uint64_t>(d), ok);
    ok = ok &&
         std::fwrite(data.data(), sizeof(T), data.size(), f) == data.size();
  };
  for (const auto& p : params)
    write_entry(p.name, p.tensor.shape(), p.tensor.data());
  for (const auto& [name, buf] : buffers)
    write_entry(name, Shape{static_cast<std::int64_t>(buf->size())}, *buf);
  ok = (std::fclose(f) == 0) && ok;
  if (!ok) throw DataError("failed writing checkpoint: " + path);
}

namespace ckpt_detail {

struct RawCheckpoint {
  std::uint32_t scalar_size = 0;
  std::uint64_t config_hash = 0;
  std::string config_text;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<unsigned char>> blobs;
};

inline RawCheckpoint read_raw(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open checkpoint: " + path);
  RawCheckpoint raw;
  char magic[8];
  std::uint32_t config_len = 0, n_entries = 0;
  bool ok = std::fread(magic, 1, 8, f) == 8 &&
            std::memcmp(magic, kMagic, 8) == 0 &&
            read_u32(f, &raw.scalar_size) && read_u64(f, &raw.config_hash) &&
            read_u32(f, &config_len);
  if (ok) {
    raw.config_text.resize(config_len);
    ok = std::fread(raw.config_text.data(), 1, config_len, f) == config_len &&
         read_u32(f, &n_entries);
  }
  for (std::uint32_t e = 0; ok && e < n_entries; ++e) {
    std::uint32_t name_len = 0, ndim = 0;
    ok = read_u32(f, &name_len);
    std::string name(name_len, '\0');
    ok = ok && std::fread(name.data(), 1, name_len, f) == name_len &&
         read_u32(f, &ndim);
    Shape shape;
    std::size_t count = 1;
    for (std::uint32_t d = 0; ok && d < ndim; ++d) {
      std::uint64_t dim = 0;
      ok = read_u64(f, &dim);
      shape.push_back(static_cast<std::int64_t>(dim));
      count *= dim;
    }
    std::vector<unsigned char> blob(count * raw.scalar_size);
    ok = ok && std::fread(blob.data(), 1, blob.size(), f) == blob.size();
    if (ok) {
      raw.names.push_back(std::move(name));
      raw.shapes.push_back(std::move(shape));
      raw.blobs.push_back(std::move(blob));
    }
  }
  std::fclose(f);
  if (!ok) throw DataError("malformed checkpoint: " + path);
  return raw;
}

}  // namespace ckpt_detail

namespace ckpt_detail {

template <typename T>
void apply_raw(const RawCheckpoint& raw, SpeakerNet<T>& net) {
  if (raw.scalar_size != sizeof(T)) {
    throw DataError("checkpoint precision (" +
                    std::to_string(raw.scalar_size * 8) +
                    "-bit) does not match this model's precision");
  }
  if (raw.config_hash != net.config().hash()) {
    throw DataError(
        "checkpoint was written for a different architecture config "
        "(hash mismatch)");
  }
  auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < raw.names.size(); ++i)
      if (raw.names[i] == name) return i;
    throw DataError("checkpoint is missing entry `" + name + "`");
  };
  for (auto& p : net.parameters()) {
    const std::size_t i = find(p.name);
    if (raw.shapes[i] != p.tensor.shape()) {
      throw DataError("checkpoint entry `" + p.name + "` has shape " +
                      shape_str(raw.shapes[i]) + ", expected " +
                      shape_str(p.tensor.shape()));
    }
    std::memcpy(p.tensor.data().data(), raw.blobs[i].data(),
                raw.blobs[i].size());
  }
  for (auto& [name, buf] : net.buffers()) {
    const std::size_t i = find(name);
    if (raw.blobs[i].size() != buf->size() * sizeof(T)) {
      throw DataError("checkpoint entry `" + name + "` has the wrong size");
    }
    std::memcpy(buf->data(), raw.blobs[i].data(), raw.blobs[i].size());
  }
}

}  // namespace ckpt_detail

// Loads parameter values into an existing net whose config hash matches.
template <typename T>
void load_checkpoint_into(const std::string& path, SpeakerNet<T>& net) {
  ckpt_detail::apply_raw(ckpt_detail::read_raw(path), net);
}

// Rebuilds the architecture from the config embedded in the checkpoint and
// loads the weights; defined in checkpoint.cc (needs the config parser).
template <typename T>
SpeakerNet<T> load_checkpoint(const std::string& path);

}  // namespace speakerkit

#endif  // SPEAKERKIT_CHECKPOINT_H_
