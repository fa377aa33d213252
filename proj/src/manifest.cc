// manifest.cc

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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "speakerkit/data.h"

namespace speakerkit {

namespace {

constexpr const char* kHeader = "utterance_id,audio_path,label,split,duration_s";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<ManifestRow> load_manifest(const std::string& path,
                                       double min_duration_s) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw ParseError("manifest " + path + " line 1: header must be `" +
                     std::string(kHeader) + "`");
  }
  std::vector<ManifestRow> rows;
  std::unordered_set<std::string> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 5) {
      throw ParseError("manifest " + path + " line " + std::to_string(lineno) +
                       ": expected 5 fields, got " +
                       std::to_string(fields.size()));
    }
    ManifestRow row;
    row.utterance_id = fields[0];
    row.audio_path = fields[1];
    row.label = fields[2];
    row.split = fields[3];
    if (row.utterance_id.empty() || row.label.empty()) {
      throw ParseError("manifest " + path + " line " + std::to_string(lineno) +
                       ": empty utterance_id or label");
    }
    if (row.split != "train" && row.split != "val" && row.split != "test") {
      throw ParseError("manifest " + path + " line " + std::to_string(lineno) +
                       ": split `" + row.split +
                       "` is not one of train/val/test");
    }
    try {
      std::size_t used = 0;
      row.duration_s = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("trail");
    } catch (const std::exception&) {
      throw ParseError("manifest " + path + " line " + std::to_string(lineno) +
                       ": bad duration `" + fields[4] + "`");
    }
    if (row.duration_s <= 0.0) {
      throw ParseError("manifest " + path + " line " + std::to_string(lineno) +
                       ": duration must be positive");
    }
    if (!seen.insert(row.utterance_id).second) {
      throw DataError("manifest " + path + ": duplicate utterance_id `" +
                      row.utterance_id + "` at line " + std::to_string(lineno));
    }
    if (row.duration_s < min_duration_s) continue;
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_manifest(const std::string& path,
                   const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << kHeader << "\n";
  char buf[64];
  for (const ManifestRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.duration_s);
    out << r.utterance_id << "," << r.audio_path << "," << r.label << ","
        << r.split << "," << buf << "\n";
  }
  if (!out) throw DataError("failed writing manifest: " + path);
}

std::vector<ManifestRow> filter_split(const std::vector<ManifestRow>& rows,
                                      const std::string& split) {
  std::vector<ManifestRow> out;
  for (const auto& r : rows)
    if (r.split == split) out.push_back(r);
  return out;
}

std::string resolve_audio_path(const std::string& manifest_path,
                               const ManifestRow& row) {
  namespace fs = std::filesystem;
  fs::path p(row.audio_path);
  if (p.is_absolute()) return row.audio_path;
  return (fs::path(manifest_path).parent_path() / p).string();
}

std::vector<std::string> label_set(const std::vector<ManifestRow>& rows) {
  std::set<std::string> labels;
  for (const auto& r : rows) labels.insert(r.label);
  return {labels.begin(), labels.end()};
}

std::vector<Trial> make_trials(const std::vector<ManifestRow>& rows,
                               const std::string& split, int n_target,
                               int n_nontarget, std::uint64_t seed) {
  const std::vector<ManifestRow> pool = filter_split(rows, split);
  std::vector<std::pair<std::size_t, std::size_t>> same, diff_candidates;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j)
      (pool[i].label == pool[j].label ? same : diff_candidates)
          .push_back({i, j});
  if (same.empty() || diff_candidates.empty()) {
    throw DataError("split `" + split +
                    "` cannot produce both target and non-target trials");
  }
  Rng rng(seed);
  std::shuffle(same.begin(), same.end(), rng);
  std::shuffle(diff_candidates.begin(), diff_candidates.end(), rng);
  std::vector<Trial> trials;
  const std::size_t nt =
      std::min<std::size_t>(same.size(), static_cast<std::size_t>(n_target));
  const std::size_t nn = std::min<std::size_t>(
      diff_candidates.size(), static_cast<std::size_t>(n_nontarget));
  for (std::size_t k = 0; k < nt; ++k)
    trials.push_back({true, pool[same[k].first].utterance_id,
                      pool[same[k].second].utterance_id});
  for (std::size_t k = 0; k < nn; ++k)
    trials.push_back({false, pool[diff_candidates[k].first].utterance_id,
                      pool[diff_candidates[k].second].utterance_id});
  return trials;
}

void save_embeddings(const std::string& path, const EmbeddingList& embs) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write embeddings: " + path);
  bool ok = true;
  for (const auto& [id, values] : embs) {
    const std::uint32_t id_len = static_cast<std::uint32_t>(id.size());
    const std::uint32_t dim = static_cast<std::uint32_t>(values.size());
    ok = ok && std::fwrite(&id_len, 4, 1, f) == 1 &&
         std::fwrite(id.data(), 1, id.size(), f) == id.size() &&
         std::fwrite(&dim, 4, 1, f) == 1 &&
         std::fwrite(values.data(), sizeof(float), values.size(), f) ==
             values.size();
  }
  ok = (std::fclose(f) == 0) && ok;
  if (!ok) throw DataError("failed writing embeddings: " + path);
}

EmbeddingList load_embeddings(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open embeddings: " + path);
  EmbeddingList embs;
  for (;;) {
    std::uint32_t id_len = 0;
    const std::size_t got = std::fread(&id_len, 1, 4, f);
    if (got == 0) break;  // clean EOF
    std::string id(id_len, '\0');
    std::uint32_t dim = 0;
    bool ok = got == 4 &&
              std::fread(id.data(), 1, id_len, f) == id_len &&
              std::fread(&dim, 4, 1, f) == 1;
    std::vector<float> values(dim);
    ok = ok && std::fread(values.data(), sizeof(float), dim, f) == dim;
    if (!ok) {
      std::fclose(f);
      throw DataError("malformed embedding file: " + path);
    }
    embs.emplace_back(std::move(id), std::move(values));
  }
  std::fclose(f);
  return embs;
}

}  // namespace speakerkit
