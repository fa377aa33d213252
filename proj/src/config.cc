// config.cc

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

#include "speakerkit/config.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace speakerkit {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::set<std::string>& known_run_keys() {
  static const std::set<std::string> keys = {
      "task",
      "data.manifest",
      "data.min_duration_s",
      "data.cache_features",
      "output.dir",
      "model.blocks",
      "model.channels",
      "model.pooling",
      "model.heads",
      "model.head_drop",
      "model.fc1_dim",
      "model.embed_dim",
      "model.fc3_dim",
      "model.n_classes",
      "model.mel_bands",
      "train.lr",
      "train.weight_decay",
      "train.batch_size",
      "train.patience",
      "train.crop_seconds",
      "train.loss",
      "train.val_metric",
      "train.seed",
      "train.max_epochs",
  };
  return keys;
}

std::vector<std::int64_t> parse_channels(const std::string& s) {
  std::vector<std::int64_t> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(tok, &used));
      if (used != tok.size()) throw std::invalid_argument("trail");
    } catch (const std::exception&) {
      throw ConfigError("bad channel list entry `" + tok + "`");
    }
  }
  if (out.empty()) throw ConfigError("empty channel list");
  return out;
}

}  // namespace

KeyValues KeyValues::from_string(const std::string& text,
                                 const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + " line " + std::to_string(lineno) +
                       ": expected `key = value`");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin + " line " + std::to_string(lineno) +
                       ": empty key");
    }
    if (kv.has(key)) {
      throw ParseError(origin + " line " + std::to_string(lineno) +
                       ": duplicate key `" + key + "`");
    }
    kv.items_.emplace_back(key, value);
  }
  return kv;
}

KeyValues KeyValues::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path);
}

bool KeyValues::has(const std::string& key) const {
  return std::any_of(items_.begin(), items_.end(),
                     [&](const auto& kv) { return kv.first == key; });
}

const std::string& KeyValues::get(const std::string& key) const {
  for (const auto& kv : items_)
    if (kv.first == key) return kv.second;
  throw ConfigError("missing required config key `" + key + "`");
}

std::string KeyValues::get_or(const std::string& key,
                              const std::string& def) const {
  for (const auto& kv : items_)
    if (kv.first == key) return kv.second;
  return def;
}

std::int64_t KeyValues::get_int(const std::string& key,
                                std::int64_t def) const {
  if (!has(key)) return def;
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const std::int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trail");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key `" + key + "`: `" + v +
                      "` is not an integer");
  }
}

std::uint64_t KeyValues::get_u64(const std::string& key,
                                 std::uint64_t def) const {
  if (!has(key)) return def;
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trail");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key `" + key + "`: `" + v +
                      "` is not an unsigned integer");
  }
}

double KeyValues::get_double(const std::string& key, double def) const {
  if (!has(key)) return def;
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trail");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key `" + key + "`: `" + v +
                      "` is not a number");
  }
}

bool KeyValues::get_bool(const std::string& key, bool def) const {
  if (!has(key)) return def;
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key `" + key + "`: `" + v +
                    "` is not a boolean (true/false)");
}

void KeyValues::set(const std::string& key, const std::string& value) {
  for (auto& kv : items_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  items_.emplace_back(key, value);
}

std::string task_name(TaskKind t) {
  return t == TaskKind::kClassification ? "classification" : "verification";
}

TaskKind parse_task(const std::string& s) {
  if (s == "classification") return TaskKind::kClassification;
  if (s == "verification") return TaskKind::kVerification;
  throw ConfigError("unknown task: " + s);
}

ModelConfig model_config_from(const KeyValues& kv) {
  ModelConfig m;
  m.blocks = static_cast<int>(kv.get_int("model.blocks", m.blocks));
  if (kv.has("model.channels")) {
    m.channels = parse_channels(kv.get("model.channels"));
  } else {
    const std::vector<std::int64_t> defaults = {128, 256, 512, 1024};
    m.channels.assign(defaults.begin(), defaults.begin() + m.blocks);
  }
  m.pooling = parse_pooling(kv.get_or("model.pooling", "dmhsa"));
  m.heads = static_cast<int>(kv.get_int(
      "model.heads", m.pooling == PoolingVariant::kSelfAttention ? 1 : 16));
  m.head_drop = kv.get_double("model.head_drop", 0.0);
  m.fc1_dim = kv.get_int("model.fc1_dim", m.fc1_dim);
  m.embed_dim = kv.get_int("model.embed_dim", m.embed_dim);
  m.fc3_dim = kv.get_int("model.fc3_dim", m.fc3_dim);
  m.n_classes = kv.get_int("model.n_classes", 0);
  m.mel_bands = kv.get_int("model.mel_bands", m.mel_bands);
  return m;
}

RunConfig RunConfig::from_keyvalues(const KeyValues& kv) {
  for (const auto& [key, value] : kv.items()) {
    if (!known_run_keys().count(key)) {
      throw ConfigError("unknown config key `" + key + "`");
    }
  }
  RunConfig rc;
  rc.task = parse_task(kv.get_or("task", "classification"));
  rc.manifest = kv.get_or("data.manifest", "");
  rc.min_duration_s = kv.get_double("data.min_duration_s", 0.0);
  rc.cache_features = kv.get_bool("data.cache_features", false);
  rc.model = model_config_from(kv);
  rc.train.lr = kv.get_double("train.lr", rc.train.lr);
  rc.train.weight_decay =
      kv.get_double("train.weight_decay", rc.train.weight_decay);
  rc.train.batch_size =
      static_cast<int>(kv.get_int("train.batch_size", rc.train.batch_size));
  rc.train.patience =
      static_cast<int>(kv.get_int("train.patience", rc.train.patience));
  rc.train.crop_seconds =
      kv.get_double("train.crop_seconds", rc.train.crop_seconds);
  rc.train.loss = parse_loss(kv.get_or("train.loss", "ce"));
  const std::string vm = kv.get_or("train.val_metric", "accuracy");
  if (vm == "accuracy") {
    rc.train.val_metric = ValMetricKind::kAccuracy;
  } else if (vm == "eer") {
    rc.train.val_metric = ValMetricKind::kEer;
  } else {
    throw ConfigError("train.val_metric must be accuracy or eer, got " + vm);
  }
  rc.train.seed = kv.get_u64("train.seed", 0);
  rc.train.max_epochs =
      static_cast<int>(kv.get_int("train.max_epochs", rc.train.max_epochs));
  rc.output_dir = kv.get_or("output.dir", "");
  return rc;
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "task = " << task_name(task) << "\n";
  os << "data.manifest = " << manifest << "\n";
  os << "data.min_duration_s = " << fmt_double(min_duration_s) << "\n";
  os << "data.cache_features = " << (cache_features ? "true" : "false")
     << "\n";
  os << model.serialize();
  os << "train.lr = " << fmt_double(train.lr) << "\n";
  os << "train.weight_decay = " << fmt_double(train.weight_decay) << "\n";
  os << "train.batch_size = " << train.batch_size << "\n";
  os << "train.patience = " << train.patience << "\n";
  os << "train.crop_seconds = " << fmt_double(train.crop_seconds) << "\n";
  os << "train.loss = " << loss_name(train.loss) << "\n";
  os << "train.val_metric = "
     << (train.val_metric == ValMetricKind::kAccuracy ? "accuracy" : "eer")
     << "\n";
  os << "train.seed = " << train.seed << "\n";
  os << "train.max_epochs = " << train.max_epochs << "\n";
  os << "output.dir = " << output_dir << "\n";
  return os.str();
}

}  // namespace speakerkit
