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

// Slow, obviously-correct reimplementations used to check the real code.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fspell/ctc.hpp"

namespace oracle {

using fspell::LabelSequence;
using fspell::Matrix;

// Collapse repeats, then drop blanks.
inline LabelSequence collapse_path(const std::vector<int>& path, int blank) {
  LabelSequence out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.indices.push_back(s);
    prev = s;
  }
  return out;
}

// Calls fn(path, log_prob) for every one of the (C+1)^T frame paths.
inline void for_each_path(const Matrix& logprobs, const std::function<void(const std::vector<int>&, double)>& fn) {
  const int T = static_cast<int>(logprobs.rows());
  const int K = static_cast<int>(logprobs.cols());
  std::vector<int> path(static_cast<std::size_t>(T), 0);
  while (true) {
    double lp = 0.0;
    for (int t = 0; t < T; ++t) lp += logprobs(t, path[static_cast<std::size_t>(t)]);
    fn(path, lp);
    int t = T - 1;
    while (t >= 0 && path[static_cast<std::size_t>(t)] == K - 1) path[static_cast<std::size_t>(t--)] = 0;
    if (t < 0) break;
    ++path[static_cast<std::size_t>(t)];
  }
}

// Probability of every label sequence reachable by some path.
inline std::map<LabelSequence, double> label_probabilities(const Matrix& logprobs) {
  std::map<LabelSequence, double> probs;
  const int blank = static_cast<int>(logprobs.cols()) - 1;
  for_each_path(logprobs, [&](const std::vector<int>& path, double lp) { probs[collapse_path(path, blank)] += std::exp(lp); });
  return probs;
}

// -log of the summed probability of all paths collapsing to target; +inf when none do.
inline double ctc_loss(const Matrix& logprobs, const LabelSequence& target) {
  double p = 0.0;
  const int blank = static_cast<int>(logprobs.cols()) - 1;
  for_each_path(logprobs, [&](const std::vector<int>& path, double lp) {
    if (collapse_path(path, blank) == target) p += std::exp(lp);
  });
  return p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
}

inline Matrix random_logprobs(int T, int classes, std::mt19937_64& rng, double spread = 2.0) {
  std::normal_distribution<double> n(0.0, spread);
  Matrix logits(T, classes);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < classes; ++k) logits(t, k) = n(rng);
  return fspell::log_softmax_rows(logits);
}

inline LabelSequence random_labels(int length, int symbols, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, symbols - 1);
  LabelSequence s;
  for (int i = 0; i < length; ++i) s.indices.push_back(pick(rng));
  return s;
}

// Memoized top-down edit distance, independent of the library's row DP.
inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == 0) return j;
    if (j == 0) return i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = d(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
    best = std::min(best, d(i - 1, j) + 1);
    best = std::min(best, d(i, j - 1) + 1);
    return memo[key] = best;
  };
  return d(a.size(), b.size());
}

// Pseudolabel intervals by definition: the window qualifies when its raw peak
// exceeds t1; an interval [i, j) qualifies when every smoothed score in it is
// >= t2 and it cannot be extended on either side.
inline std::vector<std::pair<int, int>> pseudolabel_intervals(const std::vector<double>& scores, double t1, double t2,
                                                              int K) {
  const int T = static_cast<int>(scores.size());
  double peak = -1.0;
  for (double s : scores) peak = std::max(peak, s);
  if (!(peak > t1)) return {};
  std::vector<double> smooth(scores.size());
  for (int t = 0; t < T; ++t) {
    double m = -1.0;
    for (int u = 0; u < T; ++u)
      if (std::abs(u - t) <= K / 2) m = std::max(m, scores[static_cast<std::size_t>(u)]);
    smooth[static_cast<std::size_t>(t)] = m;
  }
  auto ok = [&](int t) { return t >= 0 && t < T && smooth[static_cast<std::size_t>(t)] >= t2; };
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < T; ++i)
    for (int j = i + 1; j <= T; ++j) {
      bool all = true;
      for (int t = i; t < j; ++t) all = all && ok(t);
      if (all && !ok(i - 1) && !ok(j)) out.emplace_back(i, j);
    }
  return out;
}

// Central differences of f over each coordinate of x.
inline std::vector<double> numeric_gradient(std::vector<double>& x, const std::function<double()>& f, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
