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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fspell/errors.hpp"

namespace fspell {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Ordered letter indices, no blanks. Used both as CTC target and decode output.
struct LabelSequence {
  std::vector<int> indices;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  int operator[](std::size_t i) const { return indices[i]; }

  friend bool operator==(const LabelSequence&, const LabelSequence&) = default;
  friend auto operator<=>(const LabelSequence&, const LabelSequence&) = default;
};

/// Letter glyphs plus the CTC blank, which always sits after the last symbol.
class Alphabet {
 public:
  Alphabet();  // a-z
  explicit Alphabet(std::string symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  int blank() const { return size(); }
  int num_classes() const { return size() + 1; }
  const std::string& symbols() const { return symbols_; }

  std::optional<int> index_of(char c) const;
  char symbol(int index) const;
  bool contains(char c) const { return index_of(c).has_value(); }

  std::string render(const LabelSequence& seq) const;

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.symbols_ == b.symbols_; }

 private:
  std::string symbols_;
  std::array<int, 256> lookup_{};
};

/// Lowercases, strips every character outside the alphabet, and maps the rest
/// to indices. Throws EmptyAfterNormalization when nothing survives.
LabelSequence encode_word(std::string_view text, const Alphabet& alphabet = Alphabet());

/// Same normalization as encode_word but returns the surviving text; may be empty.
std::string normalize_word(std::string_view text, const Alphabet& alphabet = Alphabet());

struct Interval {
  double start = 0.0;
  double end = 0.0;

  double duration() const { return end - start; }
  double midpoint() const { return 0.5 * (start + end); }
  bool contains(double t) const { return t >= start && t <= end; }
  bool overlaps(const Interval& o) const { return start < o.end && o.start < end; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Half-open range of feature steps [begin, end).
struct StepRange {
  int begin = 0;
  int end = 0;
  int length() const { return end - begin; }
  friend bool operator==(const StepRange&, const StepRange&) = default;
};

struct FeatureSequence {
  FeatureMatrix data;  // T x d_f
  double fps = 25.0;
  int stride = 4;
  std::string video_id;
  double start_time = 0.0;

  int steps() const { return static_cast<int>(data.rows()); }
  int dim() const { return static_cast<int>(data.cols()); }
  double step_seconds() const { return stride / fps; }
  double end_time() const { return start_time + steps() * step_seconds(); }

  // Starts round down and ends round up so an annotated span is fully covered.
  int step_floor(double time) const;
  int step_ceil(double time) const;
  StepRange steps_for(const Interval& iv) const;
  double time_of_step(int step) const { return start_time + step * step_seconds(); }
  Interval interval_of(const StepRange& r) const { return {time_of_step(r.begin), time_of_step(r.end)}; }

  /// Steps [begin, end) clipped to the sequence; keeps timing metadata consistent.
  FeatureSequence slice(int begin, int end) const;
  FeatureSequence slice(const Interval& iv) const { auto r = steps_for(iv); return slice(r.begin, r.end); }

  /// Throws ShapeError/FormatError when T < 1, d_f < 1 or a value is not finite.
  void validate() const;
};

enum class PosTag { noun, propn, other };

std::string_view to_string(PosTag tag);
PosTag pos_tag_from_string(std::string_view s);

struct Token {
  std::string word;
  PosTag pos = PosTag::other;
  friend bool operator==(const Token&, const Token&) = default;
};

struct SubtitleRecord {
  std::string video_id;
  double start_time = 0.0;
  double end_time = 0.0;
  std::string text;
  std::vector<Token> tokens;

  Interval interval() const { return {start_time, end_time}; }
  friend bool operator==(const SubtitleRecord&, const SubtitleRecord&) = default;
};

struct MouthingSpot {
  std::string video_id;
  std::string word;
  double time = 0.0;
  double confidence = 0.0;
  friend bool operator==(const MouthingSpot&, const MouthingSpot&) = default;
};

enum class LabelSource { exemplar, mouthing, pseudolabel, manual };

std::string_view to_string(LabelSource s);
LabelSource label_source_from_string(std::string_view s);

struct AnnotationRecord {
  std::string video_id;
  Interval interval;
  std::optional<LabelSequence> word_label;
  std::optional<std::string> full_word;
  LabelSource source = LabelSource::exemplar;
  std::optional<double> confidence;
  bool verified = false;

  void validate() const;
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Sorts by (video_id, start_time) so reruns produce diffable files.
void sort_annotations(std::vector<AnnotationRecord>& records);

enum class HypothesisSource { mouthing, noun, proper_noun, ngram };

std::string_view to_string(HypothesisSource s);

/// Candidate targets for one clip. Insertion keeps the first occurrence.
class HypothesisSet {
 public:
  HypothesisSet() = default;
  HypothesisSet(LabelSequence single, HypothesisSource source) { add(std::move(single), source); }

  // Returns false when the candidate was already present (or empty).
  bool add(LabelSequence candidate, HypothesisSource source);

  const std::vector<LabelSequence>& candidates() const { return candidates_; }
  const std::vector<HypothesisSource>& provenance() const { return provenance_; }
  std::size_t size() const { return candidates_.size(); }
  bool empty() const { return candidates_.empty(); }
  bool contains(const LabelSequence& s) const;

 private:
  std::vector<LabelSequence> candidates_;
  std::vector<HypothesisSource> provenance_;
};

struct ClipSample {
  FeatureSequence features;
  int y_cls = 0;
  std::vector<std::uint8_t> y_loc;
  std::optional<LabelSequence> target;
  std::optional<HypothesisSet> hypotheses;

  void validate() const;
};

}  // namespace fspell
