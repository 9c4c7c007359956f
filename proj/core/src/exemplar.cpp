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
#include <cmath>

#include "fspell/annotation.hpp"

namespace fspell {

namespace {

Matrix normalized_rows(const FeatureMatrix& m) {
  Matrix out = m.cast<double>();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

// Smallest step count whose duration reaches `seconds`.
int steps_at_least(double seconds, double step_seconds) {
  if (seconds <= 0.0) return 0;
  return static_cast<int>(std::ceil(seconds / step_seconds - 1e-9));
}

}  // namespace

void ExemplarBank::validate() const {
  if (features.rows() == 0 || features.cols() == 0) throw ShapeError("exemplar bank is empty");
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (!features.row(i).allFinite()) throw FormatError("exemplar bank has a non-finite value");
    if (features.row(i).norm() == 0.0f) throw FormatError("exemplar " + std::to_string(i) + " has zero norm");
  }
}

Vector exemplar_scores(const FeatureSequence& features, const ExemplarBank& bank, double sim_thresh) {
  bank.validate();
  if (features.dim() != bank.features.cols())
    throw ShapeError("feature dim " + std::to_string(features.dim()) + " does not match exemplar dim " +
                     std::to_string(bank.features.cols()));
  const Matrix v = normalized_rows(features.data);
  const Matrix w = normalized_rows(bank.features);
  const Matrix sim = v * w.transpose();
  Vector scores(sim.rows());
  for (Eigen::Index t = 0; t < sim.rows(); ++t)
    scores(t) = static_cast<double>((sim.row(t).array() > sim_thresh).count()) / static_cast<double>(sim.cols());
  return scores;
}

std::vector<StepRange> mask_runs(const std::vector<bool>& mask) {
  std::vector<StepRange> runs;
  const int n = static_cast<int>(mask.size());
  for (int t = 0; t < n;) {
    if (!mask[t]) { ++t; continue; }
    int e = t;
    while (e < n && mask[e]) ++e;
    runs.push_back({t, e});
    t = e;
  }
  return runs;
}

void clean_mask(std::vector<bool>& mask, int min_seg_steps, int min_gap_steps) {
  const auto runs = mask_runs(mask);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].begin - runs[i - 1].end < min_gap_steps)
      std::fill(mask.begin() + runs[i - 1].end, mask.begin() + runs[i].begin, true);
  }
  for (const auto& r : mask_runs(mask))
    if (r.length() < min_seg_steps) std::fill(mask.begin() + r.begin, mask.begin() + r.end, false);
}

DetectionMask make_mask(std::vector<bool> frames, const FeatureSequence& timing) {
  DetectionMask out;
  out.frames = std::move(frames);
  out.runs = mask_runs(out.frames);
  for (const auto& r : out.runs) out.intervals.push_back(timing.interval_of(r));
  return out;
}

DetectionMask exemplar_detect(const FeatureSequence& features, const ExemplarBank& bank,
                              const ExemplarParams& params) {
  const Vector scores = exemplar_scores(features, bank, params.sim_thresh);
  std::vector<bool> mask(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index t = 0; t < scores.size(); ++t) mask[static_cast<std::size_t>(t)] = scores(t) > params.col_frac;
  const double step = features.step_seconds();
  clean_mask(mask, steps_at_least(params.min_seg, step), steps_at_least(params.min_gap, step));
  return make_mask(std::move(mask), features);
}

}  // namespace fspell
