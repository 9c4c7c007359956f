// Copyright 2026 The fspell Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fspell/annotation.hpp"
#include "fspell/types.hpp"

namespace fspell {

struct LexiconEntry {
  std::string word;
  PosTag pos = PosTag::other;
  std::size_t frequency = 0;  // subtitle occurrences in the generated corpus
};

struct SynthConfig {
  std::uint64_t seed = 7;
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  int d_f = 40;
  int distractors = 8;          // background prototypes, disjoint from letters
  double family_weight = 0.8;   // weight of the shared letter (or background) direction
  double fps = 25.0;
  int stride = 4;

  int letter_steps_min = 2;
  int letter_steps_max = 4;
  double noise_sigma = 0.1;
  double gap_min_seconds = 4.5;  // background between instances
  double gap_max_seconds = 7.0;

  // Generated lexicon of random letter strings, unique across categories.
  int proper_nouns = 40;
  int nouns = 40;
  int other_words = 30;
  int word_len_min = 3;
  int word_len_max = 7;

  int train_videos = 8;
  int val_videos = 2;
  int test_videos = 2;
  int instances_per_video = 10;
  int distractor_nouns = 3;  // extra noun/proper-noun tokens per subtitle
  int other_tokens = 3;

  double proper_noun_fraction = 0.74;
  double missing_rate = 0.0;     // mean fraction of omitted letters per signed word
  double mouth_rate = 0.7;       // chance an instance gets a mouthing spot
  double corruption_rate = 0.0;  // chance that spot names a different subtitle noun
  double spurious_spot_rate = 0.3;  // low-confidence spots per instance

  int exemplars = 115;
  double exemplar_sigma = 0.02;

  void validate() const;
};

/// In-memory corpus. Frame labels hold letter indices, -1 for background and
/// -2 for the separator frame between repeated letters.
struct SynthCorpus {
  SynthConfig config;
  Alphabet alphabet;
  std::vector<FeatureSequence> videos;
  std::vector<std::string> split;  // "train" | "val" | "test", per video
  std::vector<std::vector<int>> frame_labels;
  std::vector<SubtitleRecord> subtitles;
  std::vector<MouthingSpot> spots;
  std::vector<AnnotationRecord> ground_truth;  // manual, verified; word_label = signed letters
  ExemplarBank exemplars;
  std::vector<LexiconEntry> lexicon;
  Matrix letter_prototypes;  // C_sym x d_f
};

SynthCorpus generate_corpus(const SynthConfig& config);

/// Drops each non-first letter with probability rate*n/(n-1), so the expected
/// omitted fraction of an n-letter word is `rate`.
LabelSequence drop_letters(const LabelSequence& word, double rate, std::mt19937_64& rng);

/// File layout under `dir`: features/<video_id>.fseq, exemplars.fseq,
/// subtitles.jsonl, mouthings.jsonl, ground_truth.jsonl, lexicon.jsonl and
/// manifest.json. Returns the manifest path.
std::filesystem::path write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

std::string synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const std::string& text);

/// Corpus as read back from disk; what the pipeline consumes.
struct CorpusFiles {
  Alphabet alphabet;
  std::vector<FeatureSequence> videos;
  std::vector<std::string> split;
  std::vector<SubtitleRecord> subtitles;
  std::vector<MouthingSpot> spots;
  std::vector<AnnotationRecord> ground_truth;
  ExemplarBank exemplars;
  std::vector<LexiconEntry> lexicon;

  const FeatureSequence& video(const std::string& id) const;
  std::vector<std::string> video_ids(const std::string& which) const;
};

CorpusFiles read_corpus(const std::filesystem::path& manifest);

std::string to_json_line(const LexiconEntry& e);
LexiconEntry lexicon_entry_from_json_line(const std::string& line);

}  // namespace fspell
