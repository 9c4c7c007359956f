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
#include <limits>

#include "fspell/annotation.hpp"

namespace fspell {

std::string collapse_repeats(std::string_view word) {
  std::string out;
  for (char c : word)
    if (out.empty() || out.back() != c) out.push_back(c);
  return out;
}

namespace {

// Edits turning w1 into w2 where dropping a letter of w1 is free.
std::size_t deletion_free_alignment(const std::string& w1, const std::string& w2) {
  const std::size_t n = w1.size(), m = w2.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (w1[i - 1] == w2[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j], cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

ProximityBreakdown proximity_breakdown(std::string_view subtitle_word, std::string_view decoded,
                                       const Alphabet& alphabet) {
  std::string w1 = normalize_word(subtitle_word, alphabet);
  std::string w2 = normalize_word(decoded, alphabet);
  if (w1.empty()) throw EmptyAfterNormalization(std::string(subtitle_word));
  if (w2.empty()) throw EmptyAfterNormalization(std::string(decoded));

  w1 = collapse_repeats(w1);
  w2 = collapse_repeats(w2);

  ProximityBreakdown b;
  std::string kept;
  for (char c : w2) {
    if (w1.find(c) == std::string::npos)
      b.foreign_letters += 1.0;
    else
      kept.push_back(c);
  }
  w2 = std::move(kept);

  if (!w2.empty() && w2.front() == w1.front()) b.first_letter_bonus = -1.0;
  b.alignment = static_cast<double>(deletion_free_alignment(w1, w2));

  std::string distinct = w1;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const auto missing = std::count_if(distinct.begin(), distinct.end(),
                                     [&](char c) { return w2.find(c) == std::string::npos; });
  b.missing_fraction = static_cast<double>(missing) / static_cast<double>(w1.size());
  return b;
}

double proximity_score(std::string_view subtitle_word, std::string_view decoded, const Alphabet& alphabet) {
  return proximity_breakdown(subtitle_word, decoded, alphabet).total();
}

std::vector<SubtitleRecord> neighboring_subtitles(const std::vector<SubtitleRecord>& subtitles,
                                                  const Interval& interval) {
  if (subtitles.empty()) return {};
  std::vector<SubtitleRecord> sorted = subtitles;
  std::stable_sort(sorted.begin(), sorted.end(), [](const SubtitleRecord& a, const SubtitleRecord& b) {
    return a.start_time < b.start_time || (a.start_time == b.start_time && a.end_time < b.end_time);
  });
  const double mid = interval.midpoint();
  std::size_t center = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double d = mid < sorted[i].start_time ? sorted[i].start_time - mid
                     : mid > sorted[i].end_time ? mid - sorted[i].end_time
                                                : 0.0;
    if (d < best) {
      best = d;
      center = i;
    }
  }
  const std::size_t lo = center == 0 ? 0 : center - 1;
  const std::size_t hi = std::min(sorted.size(), center + 2);
  return {sorted.begin() + static_cast<std::ptrdiff_t>(lo), sorted.begin() + static_cast<std::ptrdiff_t>(hi)};
}

std::vector<SubtitleCandidate> candidate_words(const std::vector<SubtitleRecord>& subtitles, PosFilter filter) {
  std::vector<SubtitleCandidate> out;
  std::size_t position = 0;
  for (const auto& s : subtitles)
    for (const auto& tok : s.tokens) {
      if (pos_matches(tok.pos, filter)) out.push_back({tok.word, tok.pos, position});
      ++position;
    }
  return out;
}

std::optional<SubtitleMatch> match_decoding_to_subtitles(const LabelSequence& decoded,
                                                         const std::vector<SubtitleCandidate>& candidates,
                                                         double accept_thresh, const Alphabet& alphabet) {
  if (decoded.empty()) return std::nullopt;
  const std::string text = alphabet.render(decoded);
  const SubtitleCandidate* best = nullptr;
  double best_score = 0.0;
  for (const auto& c : candidates) {
    if (normalize_word(c.word, alphabet).empty()) continue;
    const double s = proximity_score(c.word, text, alphabet);
    if (!best || s < best_score || (s == best_score && c.position < best->position)) {
      best = &c;
      best_score = s;
    }
  }
  if (!best || best_score > accept_thresh) return std::nullopt;
  return SubtitleMatch{normalize_word(best->word, alphabet), best_score};
}

}  // namespace fspell
