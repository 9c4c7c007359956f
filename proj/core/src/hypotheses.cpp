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

#include <algorithm>
#include <map>
#include <set>

#include "fspell/annotation.hpp"

namespace fspell {

HypothesisOptions default_hypothesis_options(HypothesisMode mode) {
  HypothesisOptions o;
  o.include_nouns = mode == HypothesisMode::stage2;
  return o;
}

namespace {

bool shares_letter(const LabelSequence& a, const LabelSequence& b) {
  for (int x : a.indices)
    if (std::find(b.indices.begin(), b.indices.end(), x) != b.indices.end()) return true;
  return false;
}

}  // namespace

HypothesisSet build_hypothesis_set(const std::vector<SubtitleRecord>& subtitles, HypothesisMode mode,
                                   const HypothesisOptions& options, const std::optional<LabelSequence>& decoded,
                                   const std::optional<LabelSequence>& existing_label, const Alphabet& alphabet) {
  if (mode == HypothesisMode::stage2 && (!decoded || decoded->empty()))
    throw ConfigError("stage-2 hypothesis filtering needs a non-empty decoding");

  HypothesisSet out;
  if (existing_label && !existing_label->empty()) out.add(*existing_label, HypothesisSource::mouthing);

  auto offer = [&](const std::string& word, HypothesisSource source) {
    const std::string norm = normalize_word(word, alphabet);
    if (norm.empty()) return;
    LabelSequence seq = encode_word(norm, alphabet);
    if (mode == HypothesisMode::stage2 && !shares_letter(seq, *decoded)) return;
    out.add(std::move(seq), source);
  };

  for (const auto& s : subtitles) {
    for (const auto& tok : s.tokens) {
      if (tok.pos == PosTag::propn)
        offer(tok.word, HypothesisSource::proper_noun);
      else if (tok.pos == PosTag::noun && options.include_nouns)
        offer(tok.word, HypothesisSource::noun);
    }
    if (!options.include_ngrams) continue;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      std::string joined = s.tokens[i].word;
      for (std::size_t n = 1; n < 3 && i + n < s.tokens.size(); ++n) {
        if (s.tokens[i].pos != PosTag::propn) break;
        if (s.tokens[i + n].pos != PosTag::propn) break;
        joined += s.tokens[i + n].word;
        offer(joined, HypothesisSource::ngram);
      }
    }
  }
  if (out.empty()) throw EmptyHypothesisSet("no hypothesis candidates left");
  return out;
}

HypothesisSet mh_target_selector(const std::optional<LabelSequence>& auto_label, const HypothesisSet& full,
                                 std::mt19937_64& rng) {
  if (!auto_label || auto_label->empty()) return full;
  if (rng() >> 63) return HypothesisSet(*auto_label, HypothesisSource::mouthing);
  return full;
}

std::vector<AnnotationSummaryRow> summarize_annotations(const std::vector<AnnotationRecord>& records,
                                                        const Alphabet& alphabet) {
  struct Acc {
    std::size_t count = 0;
    double duration = 0.0;
    std::set<std::string> vocab;
    void add(const AnnotationRecord& r, const Alphabet& a) {
      ++count;
      duration += r.interval.duration();
      if (r.word_label) vocab.insert(a.render(*r.word_label));
    }
    AnnotationSummaryRow row(std::string name) const {
      return {std::move(name), count, vocab.size(), count ? duration / static_cast<double>(count) : 0.0};
    }
  };
  Acc all, labeled;
  std::map<LabelSource, Acc> by_source;
  for (const auto& r : records) {
    all.add(r, alphabet);
    if (!r.word_label) continue;
    labeled.add(r, alphabet);
    by_source[r.source].add(r, alphabet);
  }
  std::vector<AnnotationSummaryRow> rows{all.row("detections"), labeled.row("labeled")};
  for (const auto& [source, acc] : by_source) rows.push_back(acc.row("labeled:" + std::string(to_string(source))));
  return rows;
}

double interval_iou(const Interval& a, const Interval& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.duration() + b.duration() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double mean_best_iou(const std::vector<Interval>& truth, const std::vector<Interval>& detections) {
  if (truth.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : truth) {
    double best = 0.0;
    for (const auto& d : detections) best = std::max(best, interval_iou(t, d));
    total += best;
  }
  return total / static_cast<double>(truth.size());
}

}  // namespace fspell
