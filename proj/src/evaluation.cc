// evaluation.cc

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

#include "speakerkit/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace speakerkit {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct SweepPoint {
  double threshold;
  double far;
  double frr;
  double tpr;
};

// ROC operating points from the highest threshold (accept nothing) down to
// the lowest distinct score (accept everything).  Scores tied across target
// and non-target trials advance both rates in one step.
std::vector<SweepPoint> threshold_sweep(std::vector<ScoredTrial> scores,
                                        std::int64_t* num_target,
                                        std::int64_t* num_nontarget) {
  std::int64_t nt = 0, nn = 0;
  for (const auto& s : scores) (s.target ? nt : nn)++;
  if (nt == 0 || nn == 0) {
    throw UsageError(
        "score list needs at least one target and one non-target trial");
  }
  *num_target = nt;
  *num_nontarget = nn;
  std::sort(scores.begin(), scores.end(),
            [](const ScoredTrial& a, const ScoredTrial& b) {
              return a.score > b.score;
            });
  std::vector<SweepPoint> points;
  points.reserve(scores.size() + 1);
  points.push_back({scores.front().score + 1.0, 0.0, 1.0, 0.0});
  std::int64_t ta = 0, na = 0;
  std::size_t i = 0;
  while (i < scores.size()) {
    const double s = scores[i].score;
    for (; i < scores.size() && scores[i].score == s; ++i)
      (scores[i].target ? ta : na)++;
    points.push_back({s, static_cast<double>(na) / nn,
                      1.0 - static_cast<double>(ta) / nt,
                      static_cast<double>(ta) / nt});
  }
  return points;
}

}  // namespace

double cosine_score(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw DimensionError("cosine_score: vector lengths " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("cosine_score: zero-norm embedding");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

EerResult compute_eer(const std::vector<ScoredTrial>& scores) {
  std::int64_t nt = 0, nn = 0;
  const std::vector<SweepPoint> pts = threshold_sweep(scores, &nt, &nn);
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (pts[k].frr > pts[k].far) continue;
    if (pts[k].frr == pts[k].far) {
      return {pts[k].frr, pts[k].threshold};
    }
    // FRR crossed below FAR inside the segment [k-1, k]; both rates are
    // linear in the interpolation parameter.
    const SweepPoint& p1 = pts[k - 1];
    const SweepPoint& p2 = pts[k];
    const double num = p1.frr - p1.far;
    const double den = (p1.frr - p1.far) + (p2.far - p2.frr);
    const double alpha = num / den;
    const double eer = p1.far + alpha * (p2.far - p1.far);
    const double thr = p1.threshold + alpha * (p2.threshold - p1.threshold);
    return {eer, thr};
  }
  // Accepting everything gives FAR=1, FRR=0, so a crossing always exists.
  throw Error("compute_eer: no crossing found");
}

double compute_auc(const std::vector<ScoredTrial>& scores) {
  std::int64_t nt = 0, nn = 0;
  const std::vector<SweepPoint> pts = threshold_sweep(scores, &nt, &nn);
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    area += (pts[k].far - pts[k - 1].far) * (pts[k].tpr + pts[k - 1].tpr) / 2.0;
  }
  return area;
}

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& labels,
                                             int n_classes) {
  if (preds.size() != labels.size()) {
    throw UsageError("classification_metrics: " + std::to_string(preds.size()) +
                     " predictions vs " + std::to_string(labels.size()) +
                     " labels");
  }
  if (preds.empty()) throw UsageError("classification_metrics: empty input");
  ClassificationMetrics m;
  m.n_classes = n_classes;
  m.confusion.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], l = labels[i];
    if (p < 0 || p >= n_classes || l < 0 || l >= n_classes) {
      throw IndexError("classification_metrics: class index outside [0," +
                       std::to_string(n_classes) + ")");
    }
    m.confusion[static_cast<std::size_t>(l) * n_classes + p]++;
    if (p == l) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / preds.size();
  m.per_class_f.resize(static_cast<std::size_t>(n_classes));
  double fsum = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    const std::int64_t tp = m.confusion[static_cast<std::size_t>(c) * n_classes + c];
    std::int64_t fp = 0, fn = 0;
    for (int o = 0; o < n_classes; ++o) {
      if (o == c) continue;
      fp += m.confusion[static_cast<std::size_t>(o) * n_classes + c];
      fn += m.confusion[static_cast<std::size_t>(c) * n_classes + o];
    }
    const std::int64_t den = 2 * tp + fp + fn;
    m.per_class_f[c] = den == 0 ? 0.0 : 2.0 * tp / static_cast<double>(den);
    fsum += m.per_class_f[c];
  }
  m.macro_f = fsum / n_classes;
  return m;
}

MetricsReport verification_report(const std::vector<ScoredTrial>& scores) {
  MetricsReport r;
  const EerResult e = compute_eer(scores);
  r.eer = e.eer;
  r.threshold_at_eer = e.threshold;
  r.auc = compute_auc(scores);
  r.n_classes = 2;
  // Confusion at the EER threshold: rows actual {non-target, target},
  // columns predicted {rejected, accepted}.
  std::int64_t tn = 0, fp = 0, fn = 0, tp = 0;
  for (const auto& s : scores) {
    const bool accept = s.score >= e.threshold;
    if (s.target) {
      (accept ? tp : fn)++;
    } else {
      (accept ? fp : tn)++;
    }
  }
  r.confusion = {tn, fp, fn, tp};
  r.accuracy = static_cast<double>(tn + tp) / scores.size();
  const double f_non = (2 * tn + fn + fp) == 0
                           ? 0.0
                           : 2.0 * tn / static_cast<double>(2 * tn + fn + fp);
  const double f_tgt = (2 * tp + fp + fn) == 0
                           ? 0.0
                           : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  r.f_score = (f_non + f_tgt) / 2.0;
  return r;
}

MetricsReport classification_report(const std::vector<int>& preds,
                                    const std::vector<int>& labels,
                                    int n_classes) {
  const ClassificationMetrics m =
      classification_metrics(preds, labels, n_classes);
  MetricsReport r;
  r.accuracy = m.accuracy;
  r.f_score = m.macro_f;
  r.confusion = m.confusion;
  r.n_classes = n_classes;
  return r;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  if (eer) os << "EER:               " << *eer * 100.0 << "%\n";
  if (threshold_at_eer) os << "threshold at EER:  " << *threshold_at_eer << "\n";
  if (auc) os << "AUC:               " << *auc * 100.0 << "%\n";
  if (accuracy) os << "accuracy:          " << *accuracy * 100.0 << "%\n";
  if (f_score) os << "macro F-score:     " << *f_score << "\n";
  if (!confusion.empty()) {
    os << "confusion (rows = actual, cols = predicted):\n";
    for (int i = 0; i < n_classes; ++i) {
      os << " ";
      for (int j = 0; j < n_classes; ++j)
        os << " " << confusion[static_cast<std::size_t>(i) * n_classes + j];
      os << "\n";
    }
  }
  return os.str();
}

std::string MetricsReport::to_key_values() const {
  std::ostringstream os;
  if (eer) os << "eer = " << fmt_double(*eer) << "\n";
  if (threshold_at_eer)
    os << "threshold_at_eer = " << fmt_double(*threshold_at_eer) << "\n";
  if (auc) os << "auc = " << fmt_double(*auc) << "\n";
  if (accuracy) os << "accuracy = " << fmt_double(*accuracy) << "\n";
  if (f_score) os << "f_score = " << fmt_double(*f_score) << "\n";
  if (!confusion.empty()) {
    os << "confusion = ";
    for (std::size_t i = 0; i < confusion.size(); ++i)
      os << (i ? "," : "") << confusion[i];
    os << "\n";
  }
  return os.str();
}

std::vector<Trial> load_trials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trial list: " + path);
  std::vector<Trial> trials;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int flag = -1;
    Trial t;
    if (!(ls >> flag >> t.enroll_id >> t.test_id) || (flag != 0 && flag != 1)) {
      throw ParseError("trial list " + path + " line " +
                       std::to_string(lineno) +
                       ": expected `<0|1> <enroll_id> <test_id>`");
    }
    t.target = flag == 1;
    trials.push_back(std::move(t));
  }
  if (trials.empty()) throw DataError("trial list is empty: " + path);
  return trials;
}

void save_trials(const std::string& path, const std::vector<Trial>& trials) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trial list: " + path);
  for (const Trial& t : trials)
    out << (t.target ? 1 : 0) << " " << t.enroll_id << " " << t.test_id
        << "\n";
  if (!out) throw DataError("failed writing trial list: " + path);
}

std::vector<ScoreLine> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file: " + path);
  std::vector<ScoreLine> lines;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ScoreLine s;
    if (!(ls >> s.enroll_id >> s.test_id >> s.score)) {
      throw ParseError("score file " + path + " line " +
                       std::to_string(lineno) +
                       ": expected `<enroll_id> <test_id> <score>`");
    }
    lines.push_back(std::move(s));
  }
  if (lines.empty()) throw DataError("score file is empty: " + path);
  return lines;
}

void save_scores(const std::string& path, const std::vector<ScoreLine>& lines) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write score file: " + path);
  for (const ScoreLine& s : lines)
    out << s.enroll_id << " " << s.test_id << " " << fmt_double(s.score)
        << "\n";
  if (!out) throw DataError("failed writing score file: " + path);
}

std::vector<ScoredTrial> join_scores_with_trials(
    const std::vector<ScoreLine>& lines, const std::vector<Trial>& trials) {
  std::map<std::pair<std::string, std::string>, double> by_pair;
  for (const ScoreLine& s : lines)
    by_pair[{s.enroll_id, s.test_id}] = s.score;
  std::vector<ScoredTrial> out;
  out.reserve(trials.size());
  for (const Trial& t : trials) {
    auto it = by_pair.find({t.enroll_id, t.test_id});
    if (it == by_pair.end()) {
      throw DataError("no score for trial pair " + t.enroll_id + " / " +
                      t.test_id);
    }
    out.push_back({it->second, t.target});
  }
  return out;
}

}  // namespace speakerkit
