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

#include "fspell/ctc.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fspell {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Blank-interleaved target: b l1 b l2 b ... ln b
std::vector<int> extend_with_blanks(const LabelSequence& target, int blank) {
  std::vector<int> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

}  // namespace

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    double m = logits.row(t).maxCoeff();
    double lse = m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

int ctc_min_frames(const LabelSequence& target) {
  int repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  return static_cast<int>(target.size()) + repeats;
}

CtcResult ctc_loss(const LogProbFrame& logprobs, const LabelSequence& target, bool with_grad) {
  const int frames = static_cast<int>(logprobs.rows());
  const int classes = static_cast<int>(logprobs.cols());
  if (classes < 2) throw ShapeError("log-probability matrix needs at least one symbol plus blank");
  if (target.empty()) throw ShapeError("CTC target must be non-empty");
  const int blank = classes - 1;
  for (int l : target.indices)
    if (l < 0 || l >= blank) throw ShapeError("CTC target index out of range: " + std::to_string(l));
  const int required = ctc_min_frames(target);
  if (frames < required) throw InfeasibleTarget(frames, required);

  const std::vector<int> ext = extend_with_blanks(target, blank);
  const int states = static_cast<int>(ext.size());
  auto can_skip = [&](int s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  Matrix alpha = Matrix::Constant(frames, states, kNegInf);
  alpha(0, 0) = logprobs(0, ext[0]);
  alpha(0, 1) = logprobs(0, ext[1]);
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_sum_exp(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_sum_exp(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kNegInf ? kNegInf : acc + logprobs(t, ext[s]);
    }
  }
  const double log_likelihood = log_sum_exp(alpha(frames - 1, states - 1), alpha(frames - 1, states - 2));
  if (log_likelihood == kNegInf) throw InfeasibleTarget(frames, required);

  CtcResult result;
  result.loss = -log_likelihood;
  if (!with_grad) return result;

  // beta(t, s): log-probability of emitting frames t+1.. given state s at t.
  Matrix beta = Matrix::Constant(frames, states, kNegInf);
  beta(frames - 1, states - 1) = 0.0;
  beta(frames - 1, states - 2) = 0.0;
  for (int t = frames - 2; t >= 0; --t) {
    for (int s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + logprobs(t + 1, ext[s]);
      if (s + 1 < states) acc = log_sum_exp(acc, beta(t + 1, s + 1) + logprobs(t + 1, ext[s + 1]));
      if (s + 2 < states && can_skip(s + 2)) acc = log_sum_exp(acc, beta(t + 1, s + 2) + logprobs(t + 1, ext[s + 2]));
      beta(t, s) = acc;
    }
  }

  Matrix grad = logprobs.array().exp().matrix();
  std::vector<double> occupancy(static_cast<std::size_t>(classes));
  for (int t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (int s = 0; s < states; ++s) {
      const double ab = alpha(t, s) + beta(t, s);
      occupancy[ext[s]] = log_sum_exp(occupancy[ext[s]], ab);
    }
    for (int k = 0; k < classes; ++k)
      if (occupancy[k] != kNegInf) grad(t, k) -= std::exp(occupancy[k] - log_likelihood);
  }
  result.grad = std::move(grad);
  return result;
}

MhCtcResult mh_ctc_loss(const LogProbFrame& logprobs, const HypothesisSet& hypotheses, bool with_grad) {
  if (hypotheses.empty()) throw NoFeasibleHypothesis("empty hypothesis set");
  const int frames = static_cast<int>(logprobs.rows());
  std::optional<std::size_t> best;
  double best_loss = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& h = hypotheses.candidates()[i];
    if (!ctc_feasible(frames, h)) continue;
    double loss;
    try {
      loss = ctc_loss(logprobs, h, false).loss;
    } catch (const InfeasibleTarget&) {
      continue;
    }
    if (!best || loss < best_loss) {
      best = i;
      best_loss = loss;
    }
  }
  if (!best) throw NoFeasibleHypothesis("no hypothesis fits in " + std::to_string(frames) + " frames");
  MhCtcResult out;
  out.argmin = *best;
  if (with_grad) {
    out.result = ctc_loss(logprobs, hypotheses.candidates()[*best], true);
  } else {
    out.result.loss = best_loss;
  }
  return out;
}

}  // namespace fspell
