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

#include "fspell/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "fspell/annotation.hpp"
#include "fspell/decode.hpp"
#include "fspell/evaluation.hpp"

namespace fspell {

namespace {

std::vector<std::uint8_t> loc_labels(const TrainingVideo& video, const FeatureSequence& clip) {
  std::vector<std::uint8_t> y(static_cast<std::size_t>(clip.steps()), 0);
  const Interval span{clip.start_time, clip.end_time()};
  for (const auto& p : video.positives) {
    if (!p.interval.overlaps(span)) continue;
    const auto r = clip.steps_for(p.interval);
    for (int t = r.begin; t < r.end; ++t) y[static_cast<std::size_t>(t)] = 1;
  }
  return y;
}

std::vector<Interval> gaps_of(const TrainingVideo& video) {
  std::vector<Interval> gaps;
  double cursor = video.features.start_time;
  for (const auto& p : video.positives) {
    if (p.interval.start > cursor) gaps.push_back({cursor, p.interval.start});
    cursor = std::max(cursor, p.interval.end);
  }
  if (video.features.end_time() > cursor) gaps.push_back({cursor, video.features.end_time()});
  return gaps;
}

bool any_feasible(const HypothesisSet& set, int frames) {
  return std::any_of(set.candidates().begin(), set.candidates().end(),
                     [&](const LabelSequence& h) { return ctc_feasible(frames, h); });
}

ClipSample positive_clip(const TrainingCorpus& corpus, TrainStage stage, RecLossMode mode, const SamplerConfig& cfg,
                         std::mt19937_64& rng) {
  const std::size_t total = corpus.positive_count();
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::size_t idx = pick(rng);
  const TrainingVideo* video = nullptr;
  const PositiveSpan* span = nullptr;
  for (const auto& v : corpus.videos) {
    if (idx < v.positives.size()) {
      video = &v;
      span = &v.positives[idx];
      break;
    }
    idx -= v.positives.size();
  }

  std::uniform_real_distribution<double> dur(cfg.min_clip_seconds, cfg.max_clip_seconds);
  const double duration = std::max(dur(rng), span->interval.duration());
  const double lo = span->interval.end - duration;
  const double hi = span->interval.start;
  double start = lo < hi ? std::uniform_real_distribution<double>(lo, hi)(rng) : hi;
  const double video_start = video->features.start_time;
  const double video_end = video->features.end_time();
  start = std::clamp(start, video_start, std::max(video_start, video_end - duration));

  ClipSample s;
  s.features = video->features.slice(Interval{start, start + duration});
  s.y_cls = 1;
  s.y_loc = loc_labels(*video, s.features);
  const int frames = s.features.steps();

  if (span->label) {
    LabelSequence target = *span->label;
    if (stage == TrainStage::stage1 && mode == RecLossMode::ctc && cfg.p_drop > 0.0)
      target = drop_characters(target, cfg.p_drop, rng);
    if (ctc_feasible(frames, target)) s.target = std::move(target);
  }
  if (mode == RecLossMode::mh_ctc && span->hypotheses && !span->hypotheses->empty()) {
    HypothesisSet chosen = mh_target_selector(span->label, *span->hypotheses, rng);
    if (any_feasible(chosen, frames)) s.hypotheses = std::move(chosen);
  }
  return s;
}

ClipSample negative_clip(const TrainingCorpus& corpus, const SamplerConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dur(cfg.min_clip_seconds, cfg.max_clip_seconds);
  double duration = dur(rng);
  std::uniform_int_distribution<std::size_t> pick_video(0, corpus.videos.size() - 1);
  const std::size_t first = pick_video(rng);

  // Walk videos from a random starting point until one has a gap long enough.
  const TrainingVideo* video = nullptr;
  std::vector<Interval> eligible;
  Interval longest{0.0, 0.0};
  const TrainingVideo* longest_video = nullptr;
  for (std::size_t k = 0; k < corpus.videos.size() && !video; ++k) {
    const auto& v = corpus.videos[(first + k) % corpus.videos.size()];
    for (const auto& g : gaps_of(v)) {
      if (g.duration() >= duration) eligible.push_back(g);
      if (g.duration() > longest.duration()) {
        longest = g;
        longest_video = &v;
      }
    }
    if (!eligible.empty()) video = &v;
  }
  if (!video) {
    if (!longest_video || longest.duration() <= 0.0) throw Error("training corpus has no negative regions");
    video = longest_video;
    duration = longest.duration();
    eligible = {longest};
  }

  std::vector<double> weights;
  for (const auto& g : eligible) weights.push_back(std::max(g.duration() - duration, 1e-6));
  std::discrete_distribution<std::size_t> pick_gap(weights.begin(), weights.end());
  const Interval& gap = eligible[pick_gap(rng)];
  const double slack = gap.duration() - duration;
  const double start = gap.start + (slack > 0 ? std::uniform_real_distribution<double>(0.0, slack)(rng) : 0.0);

  ClipSample s;
  // Round inward so the clip never reaches into a span.
  const auto& f = video->features;
  int b = f.step_ceil(start);
  int e = f.step_floor(start + duration);
  if (e <= b) e = b + 1;
  s.features = f.slice(b, e);
  s.y_cls = 0;
  s.y_loc.assign(static_cast<std::size_t>(s.features.steps()), 0);
  return s;
}

double global_norm(const std::vector<double>& g) {
  double acc = 0.0;
  for (double v : g) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace

std::size_t TrainingCorpus::positive_count() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.positives.size();
  return n;
}

LabelSequence drop_characters(const LabelSequence& target, double p_drop, std::mt19937_64& rng) {
  if (target.empty()) return target;
  std::bernoulli_distribution drop(p_drop);
  LabelSequence out;
  out.indices.push_back(target[0]);
  for (std::size_t i = 1; i < target.size(); ++i)
    if (!drop(rng)) out.indices.push_back(target[i]);
  return out;
}

ClipSample sample_clip(const TrainingCorpus& corpus, TrainStage stage, RecLossMode mode, const SamplerConfig& config,
                       std::mt19937_64& rng) {
  if (corpus.videos.empty()) throw ConfigError("training corpus is empty");
  if (corpus.positive_count() == 0) throw ConfigError("training corpus has no positive spans");
  std::bernoulli_distribution positive(config.positive_rate);
  if (positive(rng)) return positive_clip(corpus, stage, mode, config, rng);
  return negative_clip(corpus, config, rng);
}

std::vector<ClipSample> sample_batch(const TrainingCorpus& corpus, TrainStage stage, RecLossMode mode,
                                     std::size_t batch_size, const SamplerConfig& config, std::mt19937_64& rng) {
  std::vector<ClipSample> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(sample_clip(corpus, stage, mode, config, rng));
  return batch;
}

ClipSample centered_clip(const TrainingVideo& video, const PositiveSpan& span, double context_seconds) {
  ClipSample s;
  s.features = video.features.slice(
      Interval{span.interval.start - context_seconds, span.interval.end + context_seconds});
  s.y_cls = 1;
  s.y_loc = loc_labels(video, s.features);
  const int frames = s.features.steps();
  if (span.label && ctc_feasible(frames, *span.label)) s.target = span.label;
  if (span.hypotheses && any_feasible(*span.hypotheses, frames)) s.hypotheses = span.hypotheses;
  return s;
}

AdamOptimizer::AdamOptimizer(std::size_t size, double beta1, double beta2, double eps)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

PlateauSchedule::PlateauSchedule(double initial, double reduced, int patience)
    : initial_(initial),
      reduced_rate_(reduced),
      patience_(patience),
      rate_(initial),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauSchedule::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    stagnant_ = 0;
  } else {
    ++stagnant_;
    if (!reduced_ && stagnant_ >= patience_) {
      reduced_ = true;
      rate_ = reduced_rate_;
    }
  }
  return rate_;
}

ValidationStats validate(const ModelParams& params, const std::vector<ClipSample>& clips, RecLossMode mode) {
  ValidationStats stats;
  if (clips.empty()) return stats;
  std::size_t edits = 0, length = 0;
  for (const auto& clip : clips) {
    const ForwardOutput out = forward(params, clip.features);
    LossBreakdown loss;
    try {
      loss = total_loss(out, clip, mode);
    } catch (const InfeasibleTarget&) {
      ClipSample stripped = clip;
      stripped.target.reset();
      stripped.hypotheses.reset();
      loss = total_loss(out, stripped, mode);
    } catch (const NoFeasibleHypothesis&) {
      ClipSample stripped = clip;
      stripped.target.reset();
      stripped.hypotheses.reset();
      loss = total_loss(out, stripped, mode);
    }
    stats.loss += loss.total;
    if (clip.target) {
      edits += levenshtein(greedy_decode(out.rec_logprobs).indices, clip.target->indices);
      length += clip.target->size();
    }
  }
  stats.loss /= static_cast<double>(clips.size());
  stats.cer = length ? 100.0 * static_cast<double>(edits) / static_cast<double>(length) : 0.0;
  return stats;
}

TrainResult train(ModelParams params, const TrainingCorpus& corpus, const std::vector<ClipSample>& validation,
                  const TrainSchedule& schedule, const std::function<void(const std::string&)>& on_log) {
  if (schedule.batch_size < 1 || schedule.epochs < 1 || schedule.steps_per_epoch < 1)
    throw ConfigError("training schedule needs positive batch size, epochs and steps per epoch");

  std::mt19937_64 sample_rng(schedule.seed);
  std::mt19937_64 dropout_rng(schedule.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamOptimizer adam(params.values().size());
  PlateauSchedule plateau(schedule.learning_rate, schedule.reduced_learning_rate, schedule.patience);

  TrainResult result{params, 0, std::numeric_limits<double>::infinity(), schedule.learning_rate, {}, 0};
  auto emit = [&](const nlohmann::json& j) {
    result.log.push_back(j.dump());
    if (on_log) on_log(result.log.back());
  };

  ModelParams grads = params.zeros_like();
  const double scale = 1.0 / schedule.batch_size;
  long step = 0;
  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    const double lr = plateau.rate();
    for (int s = 0; s < schedule.steps_per_epoch; ++s) {
      auto batch = sample_batch(corpus, schedule.stage, schedule.mode, static_cast<std::size_t>(schedule.batch_size),
                                schedule.sampler, sample_rng);
      std::fill(grads.values().begin(), grads.values().end(), 0.0);
      LossBreakdown sum;
      std::size_t used = 0, skipped = 0;
      for (const auto& clip : batch) {
        try {
          ForwardOptions opts;
          opts.dropout_rng = &dropout_rng;
          auto l = loss_and_gradient(params, clip, schedule.mode, grads, scale, opts);
          sum.total += l.total;
          sum.cls += l.cls;
          sum.loc += l.loc;
          sum.rec += l.lambda * l.rec;
          ++used;
        } catch (const InfeasibleTarget&) {
          ++skipped;
        } catch (const NoFeasibleHypothesis&) {
          ++skipped;
        }
      }
      result.skipped += skipped;
      ++step;
      const double denom = used ? static_cast<double>(used) : 1.0;
      if (!std::isfinite(sum.total)) throw TrainingDiverged("non-finite loss at step " + std::to_string(step));

      const double norm = global_norm(grads.values());
      if (!std::isfinite(norm)) throw TrainingDiverged("non-finite gradient at step " + std::to_string(step));
      if (schedule.grad_clip > 0.0 && norm > schedule.grad_clip)
        for (double& g : grads.values()) g *= schedule.grad_clip / norm;
      adam.step(params.values(), grads.values(), lr);
      if (!params.all_finite()) throw TrainingDiverged("non-finite parameters at step " + std::to_string(step));

      emit({{"type", "step"}, {"step", step}, {"epoch", epoch}, {"loss", sum.total / denom},
            {"loss_cls", sum.cls / denom}, {"loss_loc", sum.loc / denom}, {"loss_rec", sum.rec / denom},
            {"lr", lr}, {"grad_norm", norm}, {"skipped", skipped}});
    }

    const ValidationStats val = validate(params, validation, schedule.mode);
    if (!std::isfinite(val.loss)) throw TrainingDiverged("non-finite validation loss in epoch " + std::to_string(epoch));
    const bool improved = validation.empty() || val.loss < result.best_val_loss;
    if (improved) {
      result.best = params;
      result.best_val_loss = val.loss;
      result.best_epoch = epoch;
    }
    const double next_lr = plateau.observe(val.loss);
    emit({{"type", "epoch"}, {"epoch", epoch}, {"step", step}, {"val_loss", val.loss}, {"val_cer", val.cer},
          {"lr", lr}, {"next_lr", next_lr}, {"best", improved}});
  }
  result.final_learning_rate = plateau.rate();
  return result;
}

}  // namespace fspell
