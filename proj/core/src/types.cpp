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

#include "fspell/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <tuple>

namespace fspell {

namespace {
constexpr double kStepEps = 1e-9;
}

Alphabet::Alphabet() : Alphabet("abcdefghijklmnopqrstuvwxyz") {}

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
  lookup_.fill(-1);
  if (symbols_.size() < 2) throw ConfigError("alphabet needs at least two symbols");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto c = static_cast<unsigned char>(symbols_[i]);
    if (lookup_[c] != -1) throw ConfigError(std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
    lookup_[c] = static_cast<int>(i);
  }
}

std::optional<int> Alphabet::index_of(char c) const {
  int idx = lookup_[static_cast<unsigned char>(c)];
  if (idx < 0) return std::nullopt;
  return idx;
}

char Alphabet::symbol(int index) const {
  if (index < 0 || index >= size()) throw ShapeError("symbol index out of range: " + std::to_string(index));
  return symbols_[static_cast<std::size_t>(index)];
}

std::string Alphabet::render(const LabelSequence& seq) const {
  std::string out;
  out.reserve(seq.size());
  for (int i : seq.indices) out.push_back(symbol(i));
  return out;
}

std::string normalize_word(std::string_view text, const Alphabet& alphabet) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (alphabet.contains(lower)) out.push_back(lower);
  }
  return out;
}

LabelSequence encode_word(std::string_view text, const Alphabet& alphabet) {
  std::string norm = normalize_word(text, alphabet);
  if (norm.empty()) throw EmptyAfterNormalization(std::string(text));
  LabelSequence seq;
  seq.indices.reserve(norm.size());
  for (char c : norm) seq.indices.push_back(*alphabet.index_of(c));
  return seq;
}

int FeatureSequence::step_floor(double time) const {
  return static_cast<int>(std::floor((time - start_time) / step_seconds() + kStepEps));
}

int FeatureSequence::step_ceil(double time) const {
  return static_cast<int>(std::ceil((time - start_time) / step_seconds() - kStepEps));
}

StepRange FeatureSequence::steps_for(const Interval& iv) const {
  int b = std::clamp(step_floor(iv.start), 0, steps());
  int e = std::clamp(step_ceil(iv.end), 0, steps());
  return {b, std::max(b, e)};
}

FeatureSequence FeatureSequence::slice(int begin, int end) const {
  begin = std::clamp(begin, 0, steps());
  end = std::clamp(end, begin, steps());
  FeatureSequence out;
  out.data = data.middleRows(begin, end - begin);
  out.fps = fps;
  out.stride = stride;
  out.video_id = video_id;
  out.start_time = time_of_step(begin);
  return out;
}

void FeatureSequence::validate() const {
  if (data.rows() < 1) throw ShapeError("feature sequence has no time steps");
  if (data.cols() < 1) throw ShapeError("feature sequence has zero feature dimension");
  if (!(fps > 0.0) || stride < 1) throw FormatError("feature sequence needs fps > 0 and stride >= 1");
  if (!data.allFinite()) throw FormatError("feature sequence contains non-finite values");
}

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::noun: return "NOUN";
    case PosTag::propn: return "PROPN";
    case PosTag::other: return "OTHER";
  }
  return "OTHER";
}

PosTag pos_tag_from_string(std::string_view s) {
  if (s == "NOUN") return PosTag::noun;
  if (s == "PROPN") return PosTag::propn;
  if (s == "OTHER") return PosTag::other;
  throw FormatError("unknown POS tag: " + std::string(s));
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::exemplar: return "exemplar";
    case LabelSource::mouthing: return "mouthing";
    case LabelSource::pseudolabel: return "pseudolabel";
    case LabelSource::manual: return "manual";
  }
  return "exemplar";
}

LabelSource label_source_from_string(std::string_view s) {
  if (s == "exemplar") return LabelSource::exemplar;
  if (s == "mouthing") return LabelSource::mouthing;
  if (s == "pseudolabel") return LabelSource::pseudolabel;
  if (s == "manual") return LabelSource::manual;
  throw FormatError("unknown label source: " + std::string(s));
}

std::string_view to_string(HypothesisSource s) {
  switch (s) {
    case HypothesisSource::mouthing: return "mouthing";
    case HypothesisSource::noun: return "noun";
    case HypothesisSource::proper_noun: return "proper_noun";
    case HypothesisSource::ngram: return "ngram";
  }
  return "noun";
}

void AnnotationRecord::validate() const {
  if (!(interval.start < interval.end))
    throw FormatError("annotation interval must have start < end (" + video_id + ")");
  if (source == LabelSource::manual && !verified)
    throw FormatError("manual annotations must be verified (" + video_id + ")");
}

void sort_annotations(std::vector<AnnotationRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    return std::tie(a.video_id, a.interval.start, a.interval.end) <
           std::tie(b.video_id, b.interval.start, b.interval.end);
  });
}

bool HypothesisSet::add(LabelSequence candidate, HypothesisSource source) {
  if (candidate.empty() || contains(candidate)) return false;
  candidates_.push_back(std::move(candidate));
  provenance_.push_back(source);
  return true;
}

bool HypothesisSet::contains(const LabelSequence& s) const {
  return std::find(candidates_.begin(), candidates_.end(), s) != candidates_.end();
}

void ClipSample::validate() const {
  if (y_loc.size() != static_cast<std::size_t>(features.steps()))
    throw ShapeError("y_loc length must equal the clip length");
  if (y_cls == 0) {
    if (target || hypotheses) throw ShapeError("negative clips cannot carry recognition targets");
    for (auto v : y_loc)
      if (v != 0) throw ShapeError("negative clips must have an all-zero y_loc");
  }
}

}  // namespace fspell
