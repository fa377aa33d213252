// speakerkit/config.h

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

// Flat `key = value` run configuration with dotted section keys.  Unknown
// keys are hard errors.

#ifndef SPEAKERKIT_CONFIG_H_
#define SPEAKERKIT_CONFIG_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "speakerkit/errors.h"
#include "speakerkit/model.h"
#include "speakerkit/training.h"

namespace speakerkit {

class KeyValues {
 public:
  static KeyValues from_file(const std::string& path);
  static KeyValues from_string(const std::string& text,
                               const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& def) const;
  std::int64_t get_int(const std::string& key, std::int64_t def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;

  // Inserts or replaces (used for command-line overrides).
  void set(const std::string& key, const std::string& value);

  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

enum class TaskKind { kClassification, kVerification };

std::string task_name(TaskKind t);
TaskKind parse_task(const std::string& s);

struct RunConfig {
  TaskKind task = TaskKind::kClassification;
  std::string manifest;
  double min_duration_s = 0.0;
  bool cache_features = false;
  ModelConfig model;
  TrainConfig train;
  std::string output_dir;

  // Builds from parsed key-values; rejects unknown keys.
  static RunConfig from_keyvalues(const KeyValues& kv);

  // Canonical snapshot, reloadable by from_keyvalues.
  std::string serialize() const;
};

// Parses just the model.* keys (as embedded in checkpoints).
ModelConfig model_config_from(const KeyValues& kv);

}  // namespace speakerkit

#endif  // SPEAKERKIT_CONFIG_H_
