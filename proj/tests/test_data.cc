// test_data.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "speakerkit/audio.h"
#include "speakerkit/config.h"
#include "speakerkit/data.h"
#include "speakerkit/wav.h"

using namespace speakerkit;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  const std::string dir = (fs::temp_directory_path() / name).string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return std::to_string(h);
}

}  // namespace

TEST_CASE("manifest round trip and validation") {
  const std::string dir = temp_dir("sk_manifest");
  const std::vector<ManifestRow> rows = {
      {"u1", "wav/u1.wav", "spk0", "train", 3.0},
      {"u2", "wav/u2.wav", "spk0", "val", 2.25},
      {"u3", "wav/u3.wav", "spk1", "test", 1.5},
  };
  save_manifest(dir + "/m.csv", rows);
  const auto loaded = load_manifest(dir + "/m.csv");
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].utterance_id == "u1");
  CHECK(loaded[1].split == "val");
  CHECK(loaded[2].duration_s == doctest::Approx(1.5));

  // Stable order, exact round trip up to formatting.
  save_manifest(dir + "/m2.csv", loaded);
  CHECK(file_digest(dir + "/m.csv") == file_digest(dir + "/m2.csv"));

  // min_duration filter drops short rows.
  CHECK(load_manifest(dir + "/m.csv", 2.0).size() == 2);

  // Unknown split names the offending line.
  {
    std::ofstream bad(dir + "/bad_split.csv");
    bad << "utterance_id,audio_path,label,split,duration_s\n";
    bad << "u1,a.wav,spk,train,1.0\n";
    bad << "u2,b.wav,spk,dev,1.0\n";
  }
  try {
    load_manifest(dir + "/bad_split.csv");
    CHECK(false);
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("dev") != std::string::npos);
  }

  // Duplicate utterance ids are rejected.
  {
    std::ofstream dup(dir + "/dup.csv");
    dup << "utterance_id,audio_path,label,split,duration_s\n";
    dup << "u1,a.wav,spk,train,1.0\n";
    dup << "u1,b.wav,spk,test,1.0\n";
  }
  CHECK_THROWS_AS(load_manifest(dir + "/dup.csv"), DataError);

  // Wrong header and malformed rows are parse errors.
  {
    std::ofstream nohdr(dir + "/nohdr.csv");
    nohdr << "id,path\n";
  }
  CHECK_THROWS_AS(load_manifest(dir + "/nohdr.csv"), ParseError);
  {
    std::ofstream shortrow(dir + "/short.csv");
    shortrow << "utterance_id,audio_path,label,split,duration_s\n";
    shortrow << "u1,a.wav,spk,train\n";
  }
  CHECK_THROWS_AS(load_manifest(dir + "/short.csv"), ParseError);

  // Relative audio paths resolve against the manifest directory.
  CHECK(resolve_audio_path(dir + "/m.csv", rows[0]) ==
        (fs::path(dir) / "wav/u1.wav").string());

  fs::remove_all(dir);
}

TEST_CASE("synthetic corpus is deterministic and well-formed") {
  const std::string dir_a = temp_dir("sk_synth_a");
  const std::string dir_b = temp_dir("sk_synth_b");
  SyntheticSpeakerSpec spec;
  spec.n_speakers = 3;
  spec.utts_per_speaker = 4;
  spec.duration_s = 0.6;
  spec.seed = 42;

  const auto rows_a = synth_dataset(spec, dir_a);
  const auto rows_b = synth_dataset(spec, dir_b);
  REQUIRE(rows_a.size() == 12);
  REQUIRE(rows_b.size() == 12);

  // Same seed, fresh directory: byte-identical corpus.
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    CHECK(rows_a[i].utterance_id == rows_b[i].utterance_id);
    CHECK(file_digest(resolve_audio_path(dir_a + "/manifest.csv", rows_a[i])) ==
          file_digest(resolve_audio_path(dir_b + "/manifest.csv", rows_b[i])));
  }
  CHECK(file_digest(dir_a + "/manifest.csv") ==
        file_digest(dir_b + "/manifest.csv"));

  // A different seed produces different audio.
  SyntheticSpeakerSpec other = spec;
  other.seed = 43;
  const std::string dir_c = temp_dir("sk_synth_c");
  const auto rows_c = synth_dataset(other, dir_c);
  CHECK(file_digest(resolve_audio_path(dir_a + "/manifest.csv", rows_a[0])) !=
        file_digest(resolve_audio_path(dir_c + "/manifest.csv", rows_c[0])));

  // The wavs decode as 16 kHz audio of the requested length, and the
  // manifest is loadable with per-speaker splits.
  const auto loaded = load_manifest(dir_a + "/manifest.csv");
  std::set<std::string> splits;
  for (const auto& row : loaded) {
    const audio::Waveform w =
        read_wav(resolve_audio_path(dir_a + "/manifest.csv", row));
    CHECK(w.sample_rate == 16000);
    CHECK(w.samples.size() == 9600);
    splits.insert(row.split);
  }
  CHECK(splits.count("train") == 1);

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST_CASE("trial construction") {
  std::vector<ManifestRow> rows;
  for (int s = 0; s < 3; ++s)
    for (int u = 0; u < 3; ++u)
      rows.push_back({"s" + std::to_string(s) + "u" + std::to_string(u), "x",
                      "spk" + std::to_string(s), "test", 1.0});
  const auto trials = make_trials(rows, "test", 5, 8, 7);
  int targets = 0, nontargets = 0;
  for (const auto& t : trials) (t.target ? targets : nontargets)++;
  CHECK(targets == 5);
  CHECK(nontargets == 8);
  // Deterministic for a fixed seed.
  const auto again = make_trials(rows, "test", 5, 8, 7);
  REQUIRE(again.size() == trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    CHECK(trials[i].enroll_id == again[i].enroll_id);
    CHECK(trials[i].test_id == again[i].test_id);
  }

  // Requesting more targets than exist yields all available pairs.
  const auto capped = make_trials(rows, "test", 1000, 2, 7);
  int all_targets = 0;
  for (const auto& t : capped)
    if (t.target) ++all_targets;
  CHECK(all_targets == 9);  // 3 speakers x C(3,2)

  // A single-speaker split cannot produce non-target trials.
  std::vector<ManifestRow> solo;
  for (int u = 0; u < 3; ++u)
    solo.push_back({"u" + std::to_string(u), "x", "spk0", "test", 1.0});
  CHECK_THROWS_AS(make_trials(solo, "test", 3, 3, 1), DataError);
}

TEST_CASE("embedding file round trip") {
  const std::string dir = temp_dir("sk_emb");
  EmbeddingList embs = {
      {"utt_a", {0.25f, -1.5f, 3.0f}},
      {"utt_bb", {1.0f, 2.0f, 3.5f}},
  };
  save_embeddings(dir + "/e.bin", embs);
  const EmbeddingList loaded = load_embeddings(dir + "/e.bin");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "utt_a");
  CHECK(loaded[1].first == "utt_bb");
  CHECK(loaded[0].second == embs[0].second);
  CHECK(loaded[1].second == embs[1].second);

  // Truncated files are rejected.
  {
    std::ofstream trunc(dir + "/bad.bin", std::ios::binary);
    trunc << "\x05";
  }
  CHECK_THROWS_AS(load_embeddings(dir + "/bad.bin"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("run config parsing") {
  const std::string text =
      "task = classification\n"
      "data.manifest = /tmp/m.csv\n"
      "# a comment line\n"
      "model.blocks = 3\n"
      "model.channels = 32,64,128\n"
      "model.pooling = dmhsa\n"
      "model.heads = 8\n"
      "train.lr = 0.0001\n"
      "train.batch_size = 16\n"
      "train.seed = 42\n"
      "output.dir = /tmp/out\n";
  const RunConfig rc = RunConfig::from_keyvalues(KeyValues::from_string(text));
  CHECK(rc.task == TaskKind::kClassification);
  CHECK(rc.model.blocks == 3);
  CHECK(rc.model.channels == std::vector<std::int64_t>{32, 64, 128});
  CHECK(rc.model.heads == 8);
  CHECK(rc.train.batch_size == 16);
  CHECK(rc.train.seed == 42);
  CHECK(rc.output_dir == "/tmp/out");

  // The canonical snapshot reparses to the same values.
  const RunConfig rc2 =
      RunConfig::from_keyvalues(KeyValues::from_string(rc.serialize()));
  CHECK(rc2.serialize() == rc.serialize());

  // Unknown keys are errors (typo safety).
  CHECK_THROWS_AS(RunConfig::from_keyvalues(KeyValues::from_string(
                      "trian.lr = 0.1\n")),
                  ConfigError);
  // Malformed lines and duplicates are parse errors with line numbers.
  CHECK_THROWS_AS(KeyValues::from_string("no equals sign\n"), ParseError);
  CHECK_THROWS_AS(KeyValues::from_string("a = 1\na = 2\n"), ParseError);
  // Bad numbers are config errors.
  CHECK_THROWS_AS(RunConfig::from_keyvalues(
                      KeyValues::from_string("train.lr = fast\n")),
                  ConfigError);
}
