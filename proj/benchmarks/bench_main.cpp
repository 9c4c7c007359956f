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

#include <benchmark/benchmark.h>

#include <random>

#include "fspell/annotation.hpp"
#include "fspell/ctc.hpp"
#include "fspell/decode.hpp"
#include "fspell/evaluation.hpp"
#include "fspell/model.hpp"

using namespace fspell;

namespace {

Matrix random_logprobs(int T, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  Matrix logits(T, classes);
  for (int i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
  return log_softmax_rows(logits);
}

LabelSequence random_word(int length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabelSequence s;
  for (int i = 0; i < length; ++i) s.indices.push_back(static_cast<int>(rng() % 26));
  return s;
}

FeatureSequence random_features(int T, int d_f) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 1.0f);
  FeatureSequence f;
  f.data.resize(T, d_f);
  for (int i = 0; i < f.data.size(); ++i) f.data.data()[i] = n(rng);
  f.video_id = "bench";
  return f;
}

void BM_CtcLoss(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const Matrix lp = random_logprobs(T, 27, 1);
  const LabelSequence target = random_word(std::max(1, T / 6), 2);
  for (auto _ : state) benchmark::DoNotOptimize(ctc_loss(lp, target, true).loss);
}
BENCHMARK(BM_CtcLoss)->Arg(16)->Arg(64)->Arg(256);

void BM_MhCtcLoss(benchmark::State& state) {
  const Matrix lp = random_logprobs(64, 27, 1);
  HypothesisSet h;
  for (int i = 0; i < state.range(0); ++i) h.add(random_word(6, 10 + static_cast<std::uint64_t>(i)), HypothesisSource::noun);
  for (auto _ : state) benchmark::DoNotOptimize(mh_ctc_loss(lp, h, true).result.loss);
}
BENCHMARK(BM_MhCtcLoss)->Arg(1)->Arg(8)->Arg(32);

void BM_BeamDecode(benchmark::State& state) {
  const Matrix lp = random_logprobs(64, 27, 4);
  const int width = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(beam_decode(lp, width));
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(10)->Arg(30);

void BM_GreedyDecode(benchmark::State& state) {
  const Matrix lp = random_logprobs(64, 27, 4);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(lp));
}
BENCHMARK(BM_GreedyDecode);

ModelConfig bench_model() {
  ModelConfig c;
  c.d_f = 40;
  c.dropout = 0.0;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const ModelParams p = ModelParams::initialize(bench_model(), 1);
  const FeatureSequence f = random_features(static_cast<int>(state.range(0)), 40);
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, f).cls_logit);
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const ModelParams p = ModelParams::initialize(bench_model(), 1);
  ClipSample clip;
  clip.features = random_features(static_cast<int>(state.range(0)), 40);
  clip.y_cls = 1;
  clip.y_loc.assign(static_cast<std::size_t>(clip.features.steps()), 1);
  clip.target = random_word(5, 7);
  ModelParams grads = p.zeros_like();
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(p, clip, RecLossMode::ctc, grads).total);
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64);

void BM_ExemplarDetect(benchmark::State& state) {
  const FeatureSequence f = random_features(static_cast<int>(state.range(0)), 40);
  ExemplarBank bank{random_features(115, 40).data};
  for (auto _ : state) benchmark::DoNotOptimize(exemplar_detect(f, bank).runs.size());
}
BENCHMARK(BM_ExemplarDetect)->Arg(1000)->Arg(10000);

void BM_Levenshtein(benchmark::State& state) {
  const std::string a = "nuremberg", b = "turmugberg";
  for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
}
BENCHMARK(BM_Levenshtein);

}  // namespace

BENCHMARK_MAIN();
