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

#include "fspell/evaluation.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace fspell {

double cer(const LabelSequence& pred, const LabelSequence& gt) {
  if (gt.empty()) throw FormatError("CER needs a non-empty ground truth");
  return 100.0 * static_cast<double>(levenshtein(pred.indices, gt.indices)) / static_cast<double>(gt.size());
}

double cer(std::string_view pred, std::string_view gt, const Alphabet& alphabet) {
  const std::string p = normalize_word(pred, alphabet);
  const std::string g = normalize_word(gt, alphabet);
  if (g.empty()) throw FormatError("CER needs a non-empty ground truth");
  return 100.0 * static_cast<double>(levenshtein(p, g)) / static_cast<double>(g.size());
}

CERReport evaluate_predictions(const std::vector<TestItem>& items, const Alphabet& alphabet) {
  CERReport r;
  for (const auto& item : items) {
    if (item.gt_fspell.empty() || item.gt_word.empty())
      throw FormatError("test item " + item.clip_id + " has an empty ground truth");
    const std::size_t ef = levenshtein(item.prediction.indices, item.gt_fspell.indices);
    const std::size_t ew = levenshtein(item.prediction.indices, item.gt_word.indices);
    r.edits_fspell += ef;
    r.length_fspell += item.gt_fspell.size();
    r.edits_word += ew;
    r.length_word += item.gt_word.size();

    auto& bin = r.bins[static_cast<std::size_t>(length_bin(item.gt_fspell.size()))];
    ++bin.items;
    bin.edits += ef;
    bin.length += item.gt_fspell.size();

    r.items.push_back({item.clip_id, alphabet.render(item.prediction), alphabet.render(item.gt_fspell),
                       alphabet.render(item.gt_word), 100.0 * static_cast<double>(ef) / item.gt_fspell.size(),
                       100.0 * static_cast<double>(ew) / item.gt_word.size()});
  }
  if (r.length_fspell) r.cer_fspell = 100.0 * static_cast<double>(r.edits_fspell) / r.length_fspell;
  if (r.length_word) r.cer_word = 100.0 * static_cast<double>(r.edits_word) / r.length_word;
  return r;
}

std::string lookup_correct(const std::string& pred, const Lexicon& lexicon, std::size_t edit_thresh) {
  if (lexicon.empty()) throw ConfigError("lookup correction needs a non-empty lexicon");
  const std::string* best = nullptr;
  std::size_t best_dist = 0, best_freq = 0;
  // std::map iterates alphabetically, so strict comparisons keep the alphabetical tie-break.
  for (const auto& [word, freq] : lexicon) {
    const std::size_t d = levenshtein(pred, word);
    if (!best || d < best_dist || (d == best_dist && freq > best_freq)) {
      best = &word;
      best_dist = d;
      best_freq = freq;
    }
  }
  return best_dist <= edit_thresh ? *best : pred;
}

LabelSequence lookup_correct(const LabelSequence& pred, const Lexicon& lexicon, std::size_t edit_thresh,
                             const Alphabet& alphabet) {
  const std::string corrected = lookup_correct(alphabet.render(pred), lexicon, edit_thresh);
  return corrected.empty() ? pred : encode_word(corrected, alphabet);
}

std::string report_json(const CERReport& report) {
  nlohmann::json bins = nlohmann::json::array();
  for (int i = 0; i < kLengthBins; ++i) {
    const auto& b = report.bins[static_cast<std::size_t>(i)];
    bins.push_back({{"length", i + 1 == kLengthBins ? std::string("10+") : std::to_string(i + 1)},
                    {"items", b.items},
                    {"cer_fspell", b.cer()}});
  }
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : report.items)
    items.push_back({{"clip_id", it.clip_id}, {"prediction", it.prediction}, {"gt_fspell", it.gt_fspell},
                     {"gt_word", it.gt_word}, {"cer_fspell", it.cer_fspell}, {"cer_word", it.cer_word}});
  nlohmann::json j = {{"cer_fspell", report.cer_fspell},
                      {"cer_word", report.cer_word},
                      {"items_evaluated", report.items.size()},
                      {"edits_fspell", report.edits_fspell},
                      {"length_fspell", report.length_fspell},
                      {"edits_word", report.edits_word},
                      {"length_word", report.length_word},
                      {"length_bins", bins},
                      {"items", items}};
  return j.dump(2);
}

std::string report_table(const CERReport& report) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1);
  ss << "items      " << report.items.size() << "\n";
  ss << "CER_fspell " << report.cer_fspell << "\n";
  ss << "CER_word   " << report.cer_word << "\n\n";
  ss << "gt length  items  CER_fspell\n";
  for (int i = 0; i < kLengthBins; ++i) {
    const auto& b = report.bins[static_cast<std::size_t>(i)];
    if (!b.items) continue;
    std::string label = i + 1 == kLengthBins ? "10+" : std::to_string(i + 1);
    ss << std::setw(9) << label << "  " << std::setw(5) << b.items << "  " << std::setw(10) << b.cer() << "\n";
  }
  return ss.str();
}

std::string report_csv(const CERReport& report) {
  std::ostringstream ss;
  ss << "clip_id,prediction,gt_fspell,gt_word,cer_fspell,cer_word\n";
  for (const auto& it : report.items)
    ss << it.clip_id << ',' << it.prediction << ',' << it.gt_fspell << ',' << it.gt_word << ',' << it.cer_fspell << ','
       << it.cer_word << '\n';
  return ss.str();
}

std::string report_plot_data(const CERReport& report) {
  std::ostringstream ss;
  ss << "length_bin,items,cer_fspell\n";
  for (int i = 0; i < kLengthBins; ++i) {
    const auto& b = report.bins[static_cast<std::size_t>(i)];
    ss << (i + 1 == kLengthBins ? std::string("10+") : std::to_string(i + 1)) << ',' << b.items << ',' << b.cer()
       << '\n';
  }
  return ss.str();
}

}  // namespace fspell
