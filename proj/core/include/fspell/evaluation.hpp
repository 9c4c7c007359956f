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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fspell/types.hpp"

namespace fspell {

/// Unit-cost edit distance.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// 100 * edits / |gt|. Not clamped; exceeds 100 for long predictions.
double cer(const LabelSequence& pred, const LabelSequence& gt);
double cer(std::string_view pred, std::string_view gt, const Alphabet& alphabet = Alphabet());

struct TestItem {
  std::string clip_id;  // "<video_id>@<midpoint>"
  std::string video_id;
  double midpoint = 0.0;
  LabelSequence gt_fspell;  // letters actually signed
  LabelSequence gt_word;    // full word
  LabelSequence prediction;
};

inline constexpr int kLengthBins = 10;  // 1..9 and 10+

struct LengthBin {
  std::size_t items = 0;
  std::size_t edits = 0;
  std::size_t length = 0;
  double cer() const { return length ? 100.0 * static_cast<double>(edits) / static_cast<double>(length) : 0.0; }
};

struct ItemResult {
  std::string clip_id;
  std::string prediction;
  std::string gt_fspell;
  std::string gt_word;
  double cer_fspell = 0.0;
  double cer_word = 0.0;
};

struct CERReport {
  double cer_fspell = 0.0;  // corpus level: total edits / total gt length
  double cer_word = 0.0;
  std::size_t edits_fspell = 0, length_fspell = 0;
  std::size_t edits_word = 0, length_word = 0;
  std::vector<ItemResult> items;
  std::array<LengthBin, kLengthBins> bins{};  // keyed on |gt_fspell|
};

inline int length_bin(std::size_t len) { return static_cast<int>(std::min<std::size_t>(len, kLengthBins)) - 1; }

/// Throws FormatError on an empty ground truth.
CERReport evaluate_predictions(const std::vector<TestItem>& items, const Alphabet& alphabet = Alphabet());

/// Evaluation window around an instance midpoint, in seconds.
struct EvalWindow {
  double before = 2.1;
  double after = 4.0;
  Interval around(double midpoint) const { return {midpoint - before, midpoint + after}; }
};

/// Lexicon word -> frequency.
using Lexicon = std::map<std::string, std::size_t>;

/// Replaces `pred` with the closest lexicon word when the edit distance is at
/// most edit_thresh. Ties: higher frequency, then alphabetical.
std::string lookup_correct(const std::string& pred, const Lexicon& lexicon, std::size_t edit_thresh = 1);
LabelSequence lookup_correct(const LabelSequence& pred, const Lexicon& lexicon, std::size_t edit_thresh,
                             const Alphabet& alphabet = Alphabet());

std::string report_json(const CERReport& report);
std::string report_table(const CERReport& report);
std::string report_csv(const CERReport& report);
/// "length_bin,items,cer_fspell" rows for external plotting.
std::string report_plot_data(const CERReport& report);

}  // namespace fspell
