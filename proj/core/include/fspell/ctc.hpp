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

#include <cstddef>
#include <optional>

#include "fspell/types.hpp"

namespace fspell {

/// T x (C_sym + 1) log-probabilities; the blank is the last column.
using LogProbFrame = Matrix;

struct CtcResult {
  double loss = 0.0;           // -log P(target | logprobs)
  std::optional<Matrix> grad;  // d loss / d pre-softmax logits, same shape as logprobs
};

struct MhCtcResult {
  CtcResult result;
  std::size_t argmin = 0;
};

/// Minimum number of frames a CTC alignment of `target` needs: one per label
/// plus one blank between each pair of adjacent repeats.
int ctc_min_frames(const LabelSequence& target);
inline bool ctc_feasible(int frames, const LabelSequence& target) { return frames >= ctc_min_frames(target); }

/// Log-space forward-backward over the standard blank-interleaved lattice.
/// Throws InfeasibleTarget when the clip is too short for the target.
CtcResult ctc_loss(const LogProbFrame& logprobs, const LabelSequence& target, bool with_grad);

/// Minimum CTC loss over the hypotheses; the gradient is the minimizer's only.
/// Infeasible hypotheses are skipped, ties go to the lowest index.
MhCtcResult mh_ctc_loss(const LogProbFrame& logprobs, const HypothesisSet& hypotheses, bool with_grad);

/// Row-wise log-softmax, used for logits -> LogProbFrame.
Matrix log_softmax_rows(const Matrix& logits);

double log_sum_exp(double a, double b);

}  // namespace fspell
