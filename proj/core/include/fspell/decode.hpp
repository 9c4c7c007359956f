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

#include <vector>

#include "fspell/ctc.hpp"

namespace fspell {

inline constexpr int kDefaultBeamWidth = 30;

/// Best-path decoding: per-frame argmax, merge repeats, drop blanks.
LabelSequence greedy_decode(const LogProbFrame& logprobs);

struct ScoredPrefix {
  LabelSequence labels;
  double log_prob = 0.0;  // beam estimate of log P(labels | logprobs)
};

/// CTC prefix beam search without a language model. Returns the surviving
/// prefixes sorted best first; prefixes tie-break lexicographically.
std::vector<ScoredPrefix> beam_search(const LogProbFrame& logprobs, int beam_width = kDefaultBeamWidth);

LabelSequence beam_decode(const LogProbFrame& logprobs, int beam_width = kDefaultBeamWidth);

}  // namespace fspell
