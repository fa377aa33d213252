// speakerkit/evaluation.h

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

// Verification scoring (cosine similarity, EER, AUC) and classification
// metrics (accuracy, macro F-score).
//
// Conventions: the cosine similarity itself is the trial score (higher means
// same source); the EER is found by sweeping all distinct score thresholds
// (accept iff score >= t) and linearly interpolating between the two ROC
// operating points that bracket FAR = FRR.

#ifndef SPEAKERKIT_EVALUATION_H_
#define SPEAKERKIT_EVALUATION_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "speakerkit/audio.h"
#include "speakerkit/errors.h"
#include "speakerkit/model.h"

namespace speakerkit {

struct Trial {
  bool target = false;
  std::string enroll_id;
  std::string test_id;
};

struct ScoredTrial {
  double score = 0.0;
  bool target = false;
};

struct ScoreLine {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f = 0.0;
  std::vector<double> per_class_f;
  std::vector<std::int64_t> confusion;  // row-major [label, prediction]
  int n_classes = 0;
};

struct MetricsReport {
  std::optional<double> eer;
  std::optional<double> auc;
  std::optional<double> threshold_at_eer;
  std::optional<double> accuracy;
  std::optional<double> f_score;
  std::vector<std::int64_t> confusion;
  int n_classes = 0;

  std::string to_text() const;
  std::string to_key_values() const;
};

// Cosine similarity in [-1, 1]; DegenerateInputError on a zero-norm vector.
double cosine_score(const std::vector<float>& a, const std::vector<float>& b);

// Equal error rate over scored trials.  Needs at least one target and one
// non-target (UsageError otherwise).
EerResult compute_eer(const std::vector<ScoredTrial>& scores);

// Area under the ROC curve by the trapezoid rule (ties produce diagonal
// segments, which matches the Mann-Whitney statistic with ties counted 1/2).
double compute_auc(const std::vector<ScoredTrial>& scores);

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& labels,
                                             int n_classes);

// EER/AUC report plus the 2x2 confusion at the EER threshold
// (rows: non-target, target; cols: rejected, accepted).
MetricsReport verification_report(const std::vector<ScoredTrial>& scores);

MetricsReport classification_report(const std::vector<int>& preds,
                                    const std::vector<int>& labels,
                                    int n_classes);

// Trial list: `<0|1> <enroll_id> <test_id>` per line.
std::vector<Trial> load_trials(const std::string& path);
void save_trials(const std::string& path, const std::vector<Trial>& trials);

// Score lines: `<enroll_id> <test_id> <score>`.
std::vector<ScoreLine> load_scores(const std::string& path);
void save_scores(const std::string& path,
                 const std::vector<ScoreLine>& lines);

// Joins score lines with a trial list (by id pair) into scored trials.
std::vector<ScoredTrial> join_scores_with_trials(
    const std::vector<ScoreLine>& lines, const std::vector<Trial>& trials);

// Scores a trial list against an eval-mode model.  Embeddings are extracted
// once per unique utterance id via the provider and cached.
template <typename T>
MetricsReport evaluate_verification(
    SpeakerNet<T>& net, const std::vector<Trial>& trials,
    const std::function<audio::LogMelSpectrogram(const std::string&)>&
        provider,
    std::vector<ScoredTrial>* out_scores = nullptr) {
  std::unordered_map<std::string, std::vector<float>> cache;
  auto embedding_of = [&](const std::string& id) -> const std::vector<float>& {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    const std::vector<T> e = net.extract_embedding(provider(id));
    return cache.emplace(id, std::vector<float>(e.begin(), e.end()))
        .first->second;
  };
  std::vector<ScoredTrial> scores;
  scores.reserve(trials.size());
  for (const Trial& t : trials) {
    scores.push_back(
        {cosine_score(embedding_of(t.enroll_id), embedding_of(t.test_id)),
         t.target});
  }
  if (out_scores) *out_scores = scores;
  return verification_report(scores);
}

}  // namespace speakerkit

#endif  // SPEAKERKIT_EVALUATION_H_
