// speakerkit/training.h

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

// Classifier training: shuffled mini-batches of random temporal crops,
// CE/WCE loss, Adam, early stopping on a full-length validation metric.
//
// Determinism contract: epoch e draws everything (shuffle order, crop
// offsets, head-drop masks) from an RNG seeded with `base seed + e`, so a
// fixed config and seed reproduce the loss history bit for bit.

#ifndef SPEAKERKIT_TRAINING_H_
#define SPEAKERKIT_TRAINING_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "speakerkit/adam.h"
#include "speakerkit/audio.h"
#include "speakerkit/checkpoint.h"
#include "speakerkit/common.h"
#include "speakerkit/errors.h"
#include "speakerkit/evaluation.h"
#include "speakerkit/model.h"

namespace speakerkit {

enum class LossKind { kCrossEntropy, kWeightedCrossEntropy };
enum class ValMetricKind { kAccuracy, kEer };

inline std::string loss_name(LossKind k) {
  return k == LossKind::kCrossEntropy ? "ce" : "wce";
}
inline LossKind parse_loss(const std::string& s) {
  if (s == "ce") return LossKind::kCrossEntropy;
  if (s == "wce") return LossKind::kWeightedCrossEntropy;
  throw ConfigError("unknown loss: " + s);
}

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  int batch_size = 64;
  int patience = 5;
  double crop_seconds = 1.0;  // <= 0 trains on full utterances
  LossKind loss = LossKind::kCrossEntropy;
  ValMetricKind val_metric = ValMetricKind::kAccuracy;
  std::uint64_t seed = 0;
  int max_epochs = 200;

  void validate() const {
    // lr == 0 is allowed as an explicit "frozen network" escape hatch (the
    // optimizer step is skipped); negative rates are not.
    if (lr < 0.0) throw ConfigError("lr must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  }
};

// Stops when the validation metric has not strictly improved for `patience`
// consecutive epochs.
struct EarlyStopper {
  double best_metric = 0.0;
  int epochs_since_best = 0;
  int patience = 5;
  bool higher_better = true;
  bool seen_any = false;

  // Returns true when the metric strictly improved.
  bool update(double metric) {
    const bool improved =
        !seen_any ||
        (higher_better ? metric > best_metric : metric < best_metric);
    seen_any = true;
    if (improved) {
      best_metric = metric;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    return improved;
  }

  bool should_stop() const { return epochs_since_best >= patience; }
};

// Random contiguous crop to crop_frames rows; shorter inputs wrap-pad by
// repeating from the start; equal length is the identity.
inline audio::LogMelSpectrogram crop_or_pad(
    const audio::LogMelSpectrogram& spec, std::int64_t crop_frames, Rng& rng) {
  if (crop_frames < 1) throw ParameterError("crop_frames must be positive");
  const std::int64_t n = spec.num_frames, m = spec.num_bands;
  if (n == crop_frames) return spec;
  audio::LogMelSpectrogram out;
  out.num_frames = crop_frames;
  out.num_bands = m;
  out.cmn_applied = spec.cmn_applied;
  out.values.resize(static_cast<std::size_t>(crop_frames * m));
  if (n > crop_frames) {
    std::uniform_int_distribution<std::int64_t> start_dist(0, n - crop_frames);
    const std::int64_t start = start_dist(rng);
    std::copy(spec.values.begin() + start * m,
              spec.values.begin() + (start + crop_frames) * m,
              out.values.begin());
  } else {
    for (std::int64_t i = 0; i < crop_frames; ++i) {
      const std::int64_t src = i % n;
      std::copy(spec.values.begin() + src * m,
                spec.values.begin() + (src + 1) * m,
                out.values.begin() + i * m);
    }
  }
  return out;
}

// Inverse-frequency class weights with mean-1 normalization:
// w_c = total / (C * count_c).
inline std::vector<double> wce_weights(const std::vector<std::int64_t>& counts) {
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 1)
      throw ConfigError("wce_weights: every class needs at least one sample");
    total += c;
  }
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    w[i] = static_cast<double>(total) /
           (static_cast<double>(counts.size()) * counts[i]);
  return w;
}

struct Sample {
  std::string id;
  audio::LogMelSpectrogram features;  // CMN applied, full length
  int label = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;
};

struct FitResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_metric = 0.0;
};

namespace detail {

template <typename T>
struct ParamSnapshot {
  std::vector<std::vector<T>> params;
  std::vector<std::vector<T>> buffers;
};

template <typename T>
ParamSnapshot<T> snapshot(SpeakerNet<T>& net) {
  ParamSnapshot<T> s;
  for (auto& p : net.parameters()) s.params.push_back(p.tensor.data());
  for (auto& [name, buf] : net.buffers()) s.buffers.push_back(*buf);
  return s;
}

template <typename T>
void restore(SpeakerNet<T>& net, const ParamSnapshot<T>& s) {
  auto& params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].tensor.data() = s.params[i];
  auto buffers = net.buffers();
  for (std::size_t i = 0; i < buffers.size(); ++i)
    *buffers[i].second = s.buffers[i];
}

// Validation EER over all same/different-label pairs of the validation set.
template <typename T>
double validation_eer(SpeakerNet<T>& net, const std::vector<Sample>& val) {
  std::vector<std::vector<float>> embs;
  embs.reserve(val.size());
  for (const auto& s : val) {
    const std::vector<T> e = net.extract_embedding(s.features);
    embs.emplace_back(e.begin(), e.end());
  }
  std::vector<ScoredTrial> scores;
  for (std::size_t i = 0; i < val.size(); ++i)
    for (std::size_t j = i + 1; j < val.size(); ++j)
      scores.push_back({cosine_score(embs[i], embs[j]),
                        val[i].label == val[j].label});
  return compute_eer(scores).eer;
}

template <typename T>
double validation_accuracy(SpeakerNet<T>& net, const std::vector<Sample>& val) {
  std::int64_t correct = 0;
  for (const auto& s : val) {
    const std::vector<T> logits = net.forward(s.features);
    if (argmax(logits) == s.label) ++correct;
  }
  return static_cast<double>(correct) / val.size();
}

}  // namespace detail

// Trains the classifier.  When out_dir is non-empty, writes best.ckpt,
// last.ckpt and history.csv there.  The network is left holding the
// best-validation parameters.
template <typename T>
FitResult fit(SpeakerNet<T>& net, const std::vector<Sample>& train_set,
              const std::vector<Sample>& val_set, const TrainConfig& cfg,
              const std::string& out_dir = "") {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw DataError("fit: train and validation sets must be non-empty");
  const std::int64_t n_classes = net.config().n_classes;
  std::vector<std::int64_t> class_counts(static_cast<std::size_t>(n_classes),
                                         0);
  for (const auto& s : train_set) {
    if (s.label < 0 || s.label >= n_classes)
      throw IndexError("fit: label " + std::to_string(s.label) +
                       " outside [0," + std::to_string(n_classes) + ")");
    class_counts[static_cast<std::size_t>(s.label)]++;
  }
  std::int64_t crop_frames = 0;
  if (cfg.crop_seconds > 0.0) {
    crop_frames = audio::frames_for_seconds(cfg.crop_seconds);
    if (crop_frames < net.config().downsample())
      throw ConfigError("crop of " + std::to_string(crop_frames) +
                        " frames is below the front-end downsampling factor");
  }

  Tensor<T> weights;
  if (cfg.loss == LossKind::kWeightedCrossEntropy) {
    const std::vector<double> w = wce_weights(class_counts);
    std::vector<T> wt(w.begin(), w.end());
    weights = Tensor<T>::from({n_classes}, std::move(wt));
  }

  AdamOptimizer<T> adam;
  EarlyStopper stopper;
  stopper.patience = cfg.patience;
  stopper.higher_better = cfg.val_metric == ValMetricKind::kAccuracy;

  FitResult result;
  detail::ParamSnapshot<T> best = detail::snapshot(net);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    net.set_train(true);
    double loss_sum = 0.0;
    std::int64_t loss_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Tensor<T>> specs;
      std::vector<int> targets;
      specs.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train_set[order[k]];
        const audio::LogMelSpectrogram crop =
            crop_frames > 0 ? crop_or_pad(s.features, crop_frames, rng)
                            : s.features;
        specs.push_back(net.spec_to_tensor(crop));
        targets.push_back(s.label);
      }
      Tensor<T> logits = net.forward_batch_t(specs, &rng);
      Tensor<T> loss = ops::cross_entropy(logits, targets, weights);
      const double loss_val = static_cast<double>(loss.item());
      if (!std::isfinite(loss_val)) {
        throw DivergenceError("fit: non-finite loss at epoch " +
                              std::to_string(epoch) + ", batch starting at " +
                              std::to_string(start));
      }
      loss_sum += loss_val * static_cast<double>(end - start);
      loss_count += static_cast<std::int64_t>(end - start);
      adam.zero_grad(net.parameters());
      loss.backward();
      if (cfg.lr > 0.0)
        adam.step(net.parameters(), static_cast<T>(cfg.lr),
                  static_cast<T>(cfg.weight_decay));
    }
    net.set_train(false);
    const double val_metric =
        cfg.val_metric == ValMetricKind::kAccuracy
            ? detail::validation_accuracy(net, val_set)
            : detail::validation_eer(net, val_set);
    result.history.push_back({epoch, loss_sum / loss_count, val_metric,
                              cfg.lr});
    if (stopper.update(val_metric)) {
      best = detail::snapshot(net);
      result.best_epoch = epoch;
      result.best_val_metric = val_metric;
    }
    if (stopper.should_stop()) break;
  }

  if (!out_dir.empty())
    save_checkpoint(out_dir + "/last.ckpt", net);
  detail::restore(net, best);
  net.set_train(false);
  if (!out_dir.empty()) {
    save_checkpoint(out_dir + "/best.ckpt", net);
    std::ofstream hist(out_dir + "/history.csv");
    if (!hist) throw DataError("cannot write history: " + out_dir);
    hist << "epoch,train_loss,val_metric,lr\n";
    char buf[160];
    for (const EpochStats& e : result.history) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch,
                    e.train_loss, e.val_metric, e.lr);
      hist << buf;
    }
  }
  return result;
}

}  // namespace speakerkit

#endif  // SPEAKERKIT_TRAINING_H_
