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

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fspell/model.hpp"

namespace fspell {

/// A detected (or ground-truth) fingerspelling span usable as a positive clip.
struct PositiveSpan {
  Interval interval;
  std::optional<LabelSequence> label;
  std::optional<HypothesisSet> hypotheses;
};

struct TrainingVideo {
  FeatureSequence features;
  std::vector<PositiveSpan> positives;  // sorted, non-overlapping
};

struct TrainingCorpus {
  std::vector<TrainingVideo> videos;
  std::size_t positive_count() const;
};

enum class TrainStage { stage1, stage2 };

struct SamplerConfig {
  double min_clip_seconds = 1.2;
  double max_clip_seconds = 4.8;
  double positive_rate = 0.5;
  double p_drop = 0.2;  // stage-1 per-character drop probability
};

/// Drops every character except the first independently with probability p_drop.
LabelSequence drop_characters(const LabelSequence& target, double p_drop, std::mt19937_64& rng);

/// Draws one clip. Positives contain their whole span (the clip is stretched
/// when the span is longer than the drawn duration); negatives avoid all spans.
/// Targets that cannot fit the clip are removed so the sample trains cls/loc only.
ClipSample sample_clip(const TrainingCorpus& corpus, TrainStage stage, RecLossMode mode, const SamplerConfig& config,
                       std::mt19937_64& rng);

std::vector<ClipSample> sample_batch(const TrainingCorpus& corpus, TrainStage stage, RecLossMode mode,
                                     std::size_t batch_size, const SamplerConfig& config, std::mt19937_64& rng);

/// Positive clip centered on a span with fixed context, no augmentation.
/// Used for validation sets.
ClipSample centered_clip(const TrainingVideo& video, const PositiveSpan& span, double context_seconds);

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grads, double lr);
  long steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Reduce-on-plateau with a single step decay: after `patience` epochs without
/// validation improvement the rate drops from `initial` to `reduced` for good.
class PlateauSchedule {
 public:
  PlateauSchedule(double initial, double reduced, int patience);
  // Records one epoch's validation loss and returns the rate for the next epoch.
  double observe(double val_loss);
  double rate() const { return rate_; }
  bool reduced() const { return reduced_; }

 private:
  double initial_, reduced_rate_;
  int patience_;
  double rate_;
  double best_;
  int stagnant_ = 0;
  bool reduced_ = false;
};

struct TrainSchedule {
  int batch_size = 32;
  double learning_rate = 5e-5;
  double reduced_learning_rate = 1e-5;
  int patience = 3;
  int epochs = 20;
  int steps_per_epoch = 50;
  double grad_clip = 1.0;  // global L2 norm, <= 0 disables
  std::uint64_t seed = 0;
  RecLossMode mode = RecLossMode::ctc;
  TrainStage stage = TrainStage::stage1;
  SamplerConfig sampler;
};

struct TrainResult {
  ModelParams best;  // lowest validation loss
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double final_learning_rate = 0.0;
  std::vector<std::string> log;  // JSON lines
  std::size_t skipped = 0;
};

struct ValidationStats {
  double loss = 0.0;
  double cer = 0.0;  // greedy-decoded CER on clips with a target, percent
};

ValidationStats validate(const ModelParams& params, const std::vector<ClipSample>& clips, RecLossMode mode);

/// Adam training with plateau decay and best-checkpoint selection.
/// Deterministic for a fixed schedule.seed. Throws TrainingDiverged on a non-finite loss.
TrainResult train(ModelParams params, const TrainingCorpus& corpus, const std::vector<ClipSample>& validation,
                  const TrainSchedule& schedule, const std::function<void(const std::string&)>& on_log = {});

}  // namespace fspell
