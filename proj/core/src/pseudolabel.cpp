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

#include "fspell/annotation.hpp"

namespace fspell {

Vector moving_max(const Vector& scores, int K) {
  if (K < 1 || K % 2 == 0) throw ConfigError("moving-max width must be odd and >= 1, got " + std::to_string(K));
  const Eigen::Index n = scores.size();
  const Eigen::Index h = K / 2;
  Vector out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - h);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + h);
    out(t) = scores.segment(lo, hi - lo + 1).maxCoeff();
  }
  return out;
}

std::vector<StepRange> extract_pseudolabel_intervals(const Vector& loc_scores, const PseudolabelParams& params) {
  if (!(params.t2 < params.t1)) throw ConfigError("pseudolabel thresholds need t2 < t1");
  if (loc_scores.size() == 0 || !(loc_scores.maxCoeff() > params.t1)) {
    moving_max(loc_scores, params.K);  // still validates K
    return {};
  }
  const Vector smooth = moving_max(loc_scores, params.K);
  std::vector<bool> mask(static_cast<std::size_t>(smooth.size()));
  for (Eigen::Index t = 0; t < smooth.size(); ++t) mask[static_cast<std::size_t>(t)] = smooth(t) >= params.t2;
  return mask_runs(mask);
}

}  // namespace fspell
