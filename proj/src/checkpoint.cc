// checkpoint.cc

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

#include "speakerkit/checkpoint.h"

#include "speakerkit/config.h"

namespace speakerkit {

template <typename T>
SpeakerNet<T> load_checkpoint(const std::string& path) {
  const ckpt_detail::RawCheckpoint raw = ckpt_detail::read_raw(path);
  const ModelConfig config =
      model_config_from(KeyValues::from_string(raw.config_text, path));
  if (config.hash() != raw.config_hash) {
    throw DataError("checkpoint config text does not match its hash: " + path);
  }
  SpeakerNet<T> net(config, /*seed=*/0);
  ckpt_detail::apply_raw(raw, net);
  net.set_train(false);
  return net;
}

template SpeakerNet<float> load_checkpoint<float>(const std::string& path);
template SpeakerNet<double> load_checkpoint<double>(const std::string& path);

}  // namespace speakerkit
