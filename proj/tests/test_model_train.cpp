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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fspell/checkpoint.hpp"
#include "fspell/model.hpp"
#include "fspell/synth.hpp"
#include "fspell/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fspell;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_f = 6;
  c.d = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ffn_dim = 12;
  c.max_T = 16;
  c.dropout = 0.0;
  c.c_sym = 3;
  return c;
}

FeatureSequence random_features(int T, int d_f, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  FeatureSequence f;
  f.data.resize(T, d_f);
  for (int i = 0; i < f.data.size(); ++i) f.data.data()[i] = n(rng);
  f.video_id = "v";
  return f;
}

ClipSample positive_clip(const FeatureSequence& f, std::optional<LabelSequence> target) {
  ClipSample c;
  c.features = f;
  c.y_cls = 1;
  c.y_loc.assign(static_cast<std::size_t>(f.steps()), 0);
  for (int t = 1; t + 1 < f.steps(); ++t) c.y_loc[static_cast<std::size_t>(t)] = 1;
  c.target = std::move(target);
  return c;
}

LabelSequence seq(std::initializer_list<int> v) { return LabelSequence{std::vector<int>(v)}; }

// Corpus of one long video with labeled spans every 40 steps.
TrainingCorpus toy_corpus(std::mt19937_64& rng) {
  TrainingCorpus tc;
  TrainingVideo v;
  v.features = random_features(400, 4, rng);
  for (int k = 0; k < 8; ++k) {
    PositiveSpan s;
    s.interval = {k * 6.4 + 2.0, k * 6.4 + 3.2};
    s.label = seq({k % 3, (k + 1) % 3, 2, (k + 2) % 3});
    v.positives.push_back(s);
  }
  tc.videos.push_back(v);
  return tc;
}

}  // namespace

TEST_CASE("forward output shapes") {
  std::mt19937_64 rng(1);
  const ModelConfig c = tiny_config();
  const ModelParams p = ModelParams::initialize(c, 3);
  for (int T : {1, 5, 16}) {
    const ForwardOutput out = forward(p, random_features(T, c.d_f, rng));
    CHECK(out.loc_probs.size() == T);
    CHECK(out.rec_logprobs.rows() == T);
    CHECK(out.rec_logprobs.cols() == c.num_classes());
    CHECK(out.cls_prob > 0.0);
    CHECK(out.cls_prob < 1.0);
    for (int t = 0; t < T; ++t) CHECK(out.rec_logprobs.row(t).array().exp().sum() == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(forward(p, random_features(17, c.d_f, rng)), ShapeError);
  CHECK_THROWS_AS(forward(p, random_features(4, c.d_f + 1, rng)), ShapeError);
}

TEST_CASE("forward is deterministic without dropout") {
  std::mt19937_64 rng(2);
  ModelConfig c = tiny_config();
  c.dropout = 0.3;
  const ModelParams p = ModelParams::initialize(c, 5);
  const auto f = random_features(9, c.d_f, rng);
  const auto a = forward(p, f), b = forward(p, f);
  CHECK(a.rec_logits == b.rec_logits);
  CHECK(a.loc_logits == b.loc_logits);
  CHECK(a.cls_logit == b.cls_logit);
}

TEST_CASE("without positional encoding the encoder is permutation equivariant") {
  std::mt19937_64 rng(4);
  const ModelConfig c = tiny_config();
  const ModelParams p = ModelParams::initialize(c, 6);
  const auto f = random_features(7, c.d_f, rng);
  std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
  FeatureSequence g = f;
  for (int t = 0; t < 7; ++t) g.data.row(t) = f.data.row(perm[static_cast<std::size_t>(t)]);
  ForwardOptions no_pe;
  no_pe.positional_encoding = false;
  const auto a = forward(p, f, no_pe), b = forward(p, g, no_pe);
  for (int t = 0; t < 7; ++t) {
    const int src = perm[static_cast<std::size_t>(t)];
    CHECK(b.loc_logits(t) == doctest::Approx(a.loc_logits(src)).epsilon(1e-10));
    for (int k = 0; k < c.num_classes(); ++k)
      CHECK(b.rec_logits(t, k) == doctest::Approx(a.rec_logits(src, k)).epsilon(1e-10));
  }
  CHECK(b.cls_logit == doctest::Approx(a.cls_logit).epsilon(1e-10));
}

TEST_CASE("loss terms follow the labels present") {
  std::mt19937_64 rng(8);
  const ModelConfig c = tiny_config();
  const ModelParams p = ModelParams::initialize(c, 9);
  const auto f = random_features(6, c.d_f, rng);
  const ForwardOutput out = forward(p, f);

  ClipSample neg;
  neg.features = f;
  neg.y_cls = 0;
  neg.y_loc.assign(6, 0);
  auto l = total_loss(out, neg, RecLossMode::ctc);
  CHECK(l.loc == 0.0);
  CHECK(l.lambda == 0.0);
  CHECK(l.total == doctest::Approx(nn::bce_with_logit(0.0, out.cls_logit)));

  ClipSample unlabeled = positive_clip(f, std::nullopt);
  l = total_loss(out, unlabeled, RecLossMode::ctc);
  CHECK(l.lambda == 0.0);
  CHECK(l.total == doctest::Approx(l.cls + l.loc));
  CHECK(l.loc > 0.0);

  ClipSample labeled = positive_clip(f, seq({0, 1}));
  l = total_loss(out, labeled, RecLossMode::ctc);
  CHECK(l.lambda == 1.0);
  CHECK(l.rec == doctest::Approx(ctc_loss(out.rec_logprobs, seq({0, 1}), false).loss));

  ClipSample single = labeled;
  single.hypotheses = HypothesisSet(seq({0, 1}), HypothesisSource::mouthing);
  const auto mh = total_loss(out, single, RecLossMode::mh_ctc);
  CHECK(mh.rec == l.rec);
  CHECK(mh.total == l.total);
}

TEST_CASE("total loss gradient matches finite differences") {
  std::mt19937_64 rng(12);
  const ModelConfig c = tiny_config();
  ModelParams p = ModelParams::initialize(c, 13);
  // Perturb so no gradient is trivially zero (biases start at 0, gains at 1).
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : p.values()) v += n(rng);

  const auto f = random_features(5, c.d_f, rng);
  for (RecLossMode mode : {RecLossMode::ctc, RecLossMode::mh_ctc}) {
    ClipSample clip = positive_clip(f, seq({0, 2}));
    if (mode == RecLossMode::mh_ctc) {
      HypothesisSet h(seq({0, 2}), HypothesisSource::mouthing);
      h.add(seq({1, 1}), HypothesisSource::proper_noun);
      clip.hypotheses = h;
    }
    ModelParams grads = p.zeros_like();
    loss_and_gradient(p, clip, mode, grads);

    auto f_loss = [&] { return total_loss(forward(p, clip.features), clip, mode).total; };
    const auto numeric = oracle::numeric_gradient(p.values(), f_loss, 1e-6);
    double worst = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double a = grads.values()[i], b = numeric[i];
      worst = std::max(worst, std::abs(a - b) / std::max(1e-3, std::abs(a) + std::abs(b)));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  test::TempDir dir;
  const ModelParams p = ModelParams::initialize(tiny_config(), 21);
  CheckpointMeta meta{"stage1.mh", std::string("abc"), "note"};
  const std::string digest = save_checkpoint(dir.path / "m.ckpt", p, meta);
  const Checkpoint ck = load_checkpoint(dir.path / "m.ckpt");
  CHECK(ck.params.values() == p.values());
  CHECK(ck.params.config() == p.config());
  CHECK(ck.meta.stage == "stage1.mh");
  CHECK(ck.meta.parent_digest == std::optional<std::string>("abc"));
  CHECK(ck.digest == digest);

  std::string bytes = encode_checkpoint(p, meta);
  bytes[bytes.size() / 2] ^= 0x5a;
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 20)), FormatError);
}

TEST_CASE("plateau schedule drops the rate once after patience") {
  PlateauSchedule s(5e-5, 1e-5, 3);
  CHECK(s.observe(1.0) == 5e-5);
  CHECK(s.observe(1.1) == 5e-5);
  CHECK(s.observe(1.0) == 5e-5);
  CHECK(s.observe(1.2) == 1e-5);
  CHECK(s.reduced());
  CHECK(s.observe(0.5) == 1e-5);
}

TEST_CASE("adam minimizes a quadratic") {
  AdamOptimizer adam(2);
  std::vector<double> x{3.0, -2.0};
  for (int i = 0; i < 2000; ++i) adam.step(x, {2.0 * (x[0] - 1.0), 2.0 * (x[1] + 0.5)}, 0.01);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(x[1] == doctest::Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("sampler balances positives and negatives") {
  std::mt19937_64 rng(31);
  const TrainingCorpus tc = toy_corpus(rng);
  SamplerConfig cfg;
  std::mt19937_64 srng(32);
  int pos = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ClipSample c = sample_clip(tc, TrainStage::stage1, RecLossMode::ctc, cfg, srng);
    CHECK_NOTHROW(c.validate());
    pos += c.y_cls;
    const double dur = c.features.steps() * c.features.step_seconds();
    if (!c.y_cls) CHECK(dur <= cfg.max_clip_seconds + 1e-9);
  }
  const double frac = static_cast<double>(pos) / n;
  CHECK(frac >= 0.47);
  CHECK(frac <= 0.53);
}

TEST_CASE("negatives never overlap positive spans") {
  std::mt19937_64 rng(41);
  const TrainingCorpus tc = toy_corpus(rng);
  SamplerConfig cfg;
  cfg.positive_rate = 0.0;
  std::mt19937_64 srng(42);
  for (int i = 0; i < 500; ++i) {
    const ClipSample c = sample_clip(tc, TrainStage::stage2, RecLossMode::ctc, cfg, srng);
    const Interval iv{c.features.start_time, c.features.end_time()};
    for (const auto& s : tc.videos[0].positives) CHECK_FALSE(iv.overlaps(s.interval));
  }
}

TEST_CASE("stage 1 drops characters but keeps the first, stage 2 never mutates") {
  std::mt19937_64 rng(51);
  const TrainingCorpus tc = toy_corpus(rng);
  SamplerConfig cfg;
  cfg.positive_rate = 1.0;
  cfg.p_drop = 0.5;
  std::mt19937_64 srng(52);
  int shortened = 0;
  for (int i = 0; i < 500; ++i) {
    const ClipSample c1 = sample_clip(tc, TrainStage::stage1, RecLossMode::ctc, cfg, srng);
    const ClipSample c2 = sample_clip(tc, TrainStage::stage2, RecLossMode::ctc, cfg, srng);
    REQUIRE(c1.target);
    REQUIRE(c2.target);
    bool found1 = false, found2 = false;
    for (const auto& s : tc.videos[0].positives) {
      const auto& full = *s.label;
      if (c2.target == full) found2 = true;
      // c1 target must be a first-letter-preserving subsequence of some label
      if (c1.target->indices.front() != full.indices.front()) continue;
      std::size_t j = 0;
      for (int x : full.indices)
        if (j < c1.target->size() && (*c1.target)[j] == x) ++j;
      if (j == c1.target->size()) found1 = true;
    }
    CHECK(found1);
    CHECK(found2);
    shortened += c1.target->size() < 4;
  }
  CHECK(shortened > 100);
}

TEST_CASE("drop_characters statistics") {
  std::mt19937_64 rng(61);
  const LabelSequence w = seq({0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1});
  double kept = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const auto d = drop_characters(w, 0.2, rng);
    CHECK(d[0] == 0);
    kept += static_cast<double>(d.size() - 1);
  }
  CHECK(kept / (2000.0 * 10.0) == doctest::Approx(0.8).epsilon(0.03));
}

TEST_CASE("training is reproducible for a fixed seed") {
  std::mt19937_64 rng(71);
  const TrainingCorpus tc = toy_corpus(rng);
  ModelConfig c = tiny_config();
  c.d_f = 4;
  c.max_T = 40;
  c.dropout = 0.1;
  TrainSchedule s;
  s.batch_size = 4;
  s.epochs = 2;
  s.steps_per_epoch = 5;
  s.seed = 99;
  s.learning_rate = 1e-3;
  const ModelParams init = ModelParams::initialize(c, 1);
  const TrainResult a = train(init, tc, {}, s);
  const TrainResult b = train(init, tc, {}, s);
  CHECK(a.log == b.log);
  CHECK(a.best.values() == b.best.values());
  s.seed = 100;
  const TrainResult d = train(init, tc, {}, s);
  CHECK(a.log != d.log);
}

TEST_CASE("training learns a three-letter synthetic alphabet") {
  SynthConfig sc;
  sc.seed = 5;
  sc.alphabet = "abc";
  sc.proper_nouns = 20;
  sc.nouns = 20;
  sc.other_words = 10;
  sc.train_videos = 6;
  sc.val_videos = 1;
  sc.test_videos = 0;
  const SynthCorpus corpus = generate_corpus(sc);

  TrainingCorpus train_set, val_set;
  for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
    TrainingVideo tv;
    tv.features = corpus.videos[v];
    for (const auto& r : corpus.ground_truth)
      if (r.video_id == tv.features.video_id) tv.positives.push_back({r.interval, r.word_label, std::nullopt});
    (corpus.split[v] == "train" ? train_set : val_set).videos.push_back(std::move(tv));
  }
  std::vector<ClipSample> val;
  for (const auto& v : val_set.videos)
    for (const auto& s : v.positives) val.push_back(centered_clip(v, s, 0.5));

  ModelConfig mc;
  mc.d_f = sc.d_f;
  mc.c_sym = 3;
  mc.d = 32;
  mc.n_heads = 2;
  mc.ffn_dim = 64;
  mc.n_layers = 1;
  TrainSchedule s;
  s.stage = TrainStage::stage2;
  s.learning_rate = 2e-3;
  s.reduced_learning_rate = 5e-4;
  s.batch_size = 16;
  s.epochs = 12;
  s.steps_per_epoch = 40;
  s.seed = 3;
  const TrainResult r = train(ModelParams::initialize(mc, 4), train_set, val, s);
  const double cer = validate(r.best, val, RecLossMode::ctc).cer;
  MESSAGE("three-letter validation CER: " << cer);
  CHECK(cer < 10.0);
}
