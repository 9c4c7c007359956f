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

#include "fspell/annotation.hpp"

namespace fspell {

bool pos_matches(PosTag tag, PosFilter filter) {
  if (filter == PosFilter::proper_nouns) return tag == PosTag::propn;
  return tag == PosTag::noun || tag == PosTag::propn;
}

namespace {

bool tagged_in_overlapping_subtitle(const std::string& word, const Interval& detection,
                                    const std::vector<const SubtitleRecord*>& subtitles, PosFilter filter,
                                    const Alphabet& alphabet) {
  for (const auto* s : subtitles) {
    if (!s->interval().overlaps(detection)) continue;
    for (const auto& tok : s->tokens)
      if (pos_matches(tok.pos, filter) && normalize_word(tok.word, alphabet) == word) return true;
  }
  return false;
}

}  // namespace

std::vector<AnnotationRecord> associate_mouthings(const std::string& video_id, const std::vector<Interval>& detections,
                                                  const std::vector<MouthingSpot>& spots,
                                                  const std::vector<SubtitleRecord>& subtitles,
                                                  const AssociationParams& params, const Alphabet& alphabet) {
  std::vector<const SubtitleRecord*> subs;
  for (const auto& s : subtitles)
    if (s.video_id == video_id) subs.push_back(&s);

  std::vector<AnnotationRecord> out;
  out.reserve(detections.size());
  for (const auto& det : detections) {
    AnnotationRecord rec;
    rec.video_id = video_id;
    rec.interval = det;
    const MouthingSpot* best = nullptr;
    std::string best_word;
    for (const auto& spot : spots) {
      if (spot.video_id != video_id || !det.contains(spot.time) || !(spot.confidence > params.conf_min)) continue;
      std::string word = normalize_word(spot.word, alphabet);
      if (word.empty() || !tagged_in_overlapping_subtitle(word, det, subs, params.pos_filter, alphabet)) continue;
      if (!best || spot.confidence > best->confidence ||
          (spot.confidence == best->confidence && spot.time < best->time)) {
        best = &spot;
        best_word = std::move(word);
      }
    }
    if (best) {
      rec.word_label = encode_word(best_word, alphabet);
      rec.full_word = best_word;
      rec.source = LabelSource::mouthing;
      rec.confidence = best->confidence;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace fspell
