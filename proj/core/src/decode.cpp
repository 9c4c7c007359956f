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

#include "fspell/decode.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace fspell {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct PrefixScore {
  double blank = kNegInf;      // paths ending in blank
  double non_blank = kNegInf;  // paths ending in the prefix's last label
  double total() const { return log_sum_exp(blank, non_blank); }
};

using Beam = std::map<std::vector<int>, PrefixScore>;

}  // namespace

LabelSequence greedy_decode(const LogProbFrame& logprobs) {
  const int blank = static_cast<int>(logprobs.cols()) - 1;
  LabelSequence out;
  int prev = blank;
  for (Eigen::Index t = 0; t < logprobs.rows(); ++t) {
    Eigen::Index k;
    logprobs.row(t).maxCoeff(&k);
    const int label = static_cast<int>(k);
    if (label != blank && label != prev) out.indices.push_back(label);
    prev = label;
  }
  return out;
}

std::vector<ScoredPrefix> beam_search(const LogProbFrame& logprobs, int beam_width) {
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  const int classes = static_cast<int>(logprobs.cols());
  const int blank = classes - 1;

  Beam beam;
  beam[{}].blank = 0.0;
  std::vector<std::pair<std::vector<int>, PrefixScore>> ranked;

  for (Eigen::Index t = 0; t < logprobs.rows(); ++t) {
    Beam next;
    for (const auto& [prefix, score] : beam) {
      const double total = score.total();
      auto& same = next[prefix];
      same.blank = log_sum_exp(same.blank, total + logprobs(t, blank));
      for (int c = 0; c < blank; ++c) {
        const double lp = logprobs(t, c);
        std::vector<int> extended = prefix;
        extended.push_back(c);
        auto& ext = next[extended];
        if (!prefix.empty() && prefix.back() == c) {
          // A repeat only extends the prefix after a blank; otherwise it collapses.
          ext.non_blank = log_sum_exp(ext.non_blank, score.blank + lp);
          auto& stay = next[prefix];
          stay.non_blank = log_sum_exp(stay.non_blank, score.non_blank + lp);
        } else {
          ext.non_blank = log_sum_exp(ext.non_blank, total + lp);
        }
      }
    }

    ranked.assign(next.begin(), next.end());
    auto better = [](const auto& a, const auto& b) {
      const double ta = a.second.total(), tb = b.second.total();
      if (ta != tb) return ta > tb;
      return a.first < b.first;
    };
    const auto keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(beam_width));
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), better);
    ranked.resize(keep);
    beam = Beam(ranked.begin(), ranked.end());
  }

  std::vector<ScoredPrefix> out;
  out.reserve(beam.size());
  for (const auto& [prefix, score] : beam) out.push_back({LabelSequence{prefix}, score.total()});
  std::sort(out.begin(), out.end(), [](const ScoredPrefix& a, const ScoredPrefix& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.labels < b.labels;
  });
  return out;
}

LabelSequence beam_decode(const LogProbFrame& logprobs, int beam_width) {
  auto prefixes = beam_search(logprobs, beam_width);
  if (prefixes.empty()) return {};
  return prefixes.front().labels;
}

}  // namespace fspell
