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

#include <random>
#include <set>

#include "fspell/annotation.hpp"
#include "oracles.hpp"

using namespace fspell;

namespace {

SubtitleRecord subtitle(double start, double end, std::vector<Token> tokens, std::string video = "v") {
  SubtitleRecord s;
  s.video_id = std::move(video);
  s.start_time = start;
  s.end_time = end;
  s.tokens = std::move(tokens);
  for (const auto& t : s.tokens) s.text += (s.text.empty() ? "" : " ") + t.word;
  return s;
}

std::string render(const LabelSequence& s) { return Alphabet().render(s); }

std::set<std::string> rendered(const HypothesisSet& h) {
  std::set<std::string> out;
  for (const auto& c : h.candidates()) out.insert(render(c));
  return out;
}

FeatureSequence seq_of(FeatureMatrix m) {
  FeatureSequence f;
  f.data = std::move(m);
  f.video_id = "v";
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// exemplar detection

TEST_CASE("a frame equal to the only exemplar scores 1") {
  ExemplarBank bank{FeatureMatrix::Zero(1, 4)};
  bank.features << 1, 2, 0, 0;
  FeatureMatrix m = FeatureMatrix::Zero(3, 4);
  m.row(1) << 2, 4, 0, 0;  // same direction
  m.row(0) << 0, 0, 1, 0;
  m.row(2) << -1, -2, 0, 0;
  const Vector s = exemplar_scores(seq_of(m), bank, 0.4);
  CHECK(s(0) == 0.0);
  CHECK(s(1) == 1.0);
  CHECK(s(2) == 0.0);
}

TEST_CASE("features orthogonal to every exemplar give an empty mask") {
  ExemplarBank bank{FeatureMatrix::Zero(3, 6)};
  bank.features(0, 0) = bank.features(1, 1) = bank.features(2, 2) = 1.0f;
  FeatureMatrix m = FeatureMatrix::Zero(20, 6);
  for (int t = 0; t < 20; ++t) m(t, 3 + t % 3) = 1.0f;
  const auto det = exemplar_detect(seq_of(m), bank);
  CHECK(det.runs.empty());
  CHECK(det.intervals.empty());
}

TEST_CASE("planted exemplar frames are recovered") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 1.0f);
  const int d = 16;
  ExemplarBank bank{FeatureMatrix::Zero(20, d)};
  for (int e = 0; e < 20; ++e)
    for (int k = 0; k < d; ++k) bank.features(e, k) = (k < 4 ? 1.0f : 0.0f) + 0.05f * n(rng);
  FeatureMatrix m(50, d);
  for (int t = 0; t < 50; ++t)
    for (int k = 0; k < d; ++k) m(t, k) = 0.3f * n(rng);
  for (int t = 10; t < 30; ++t) m.row(t) = bank.features.row(t % 20) + 0.1f * FeatureMatrix::Random(1, d);
  const auto det = exemplar_detect(seq_of(m), bank);
  REQUIRE(!det.intervals.empty());
  const FeatureSequence f = seq_of(m);
  const Interval truth = f.interval_of({10, 30});
  CHECK(mean_best_iou({truth}, det.intervals) >= 0.8);
}

TEST_CASE("mask cleanup fills short gaps before dropping short segments") {
  //            0  1  2  3  4  5  6  7  8  9 10 11
  std::vector<bool> m{1, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0};
  clean_mask(m, 3, 2);
  // gap at 2 filled -> run 0..4 kept (len 4); run at 7 is too short
  CHECK(mask_runs(m) == std::vector<StepRange>{{0, 4}});
  std::vector<bool> edge{0, 1, 1, 1, 0};
  clean_mask(edge, 1, 5);  // leading/trailing false runs are not gaps
  CHECK(mask_runs(edge) == std::vector<StepRange>{{1, 4}});
}

TEST_CASE("interval IoU") {
  CHECK(interval_iou({0, 2}, {1, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(interval_iou({0, 1}, {2, 3}) == 0.0);
  CHECK(mean_best_iou({{0, 2}, {10, 12}}, {{0, 2}}) == doctest::Approx(0.5));
  CHECK(mean_best_iou({}, {{0, 1}}) == 0.0);
}

// ---------------------------------------------------------------------------
// mouthing association

TEST_CASE("mouthing association") {
  const std::vector<SubtitleRecord> subs{
      subtitle(0.0, 5.0, {{"Berkeley", PosTag::propn}, {"homes", PosTag::noun}, {"went", PosTag::other}}),
      subtitle(8.0, 9.0, {{"Sarah", PosTag::propn}})};
  const std::vector<Interval> dets{{1.0, 2.0}, {3.0, 4.0}, {6.0, 7.0}};

  SUBCASE("spot inside, proper noun, confident") {
    const auto r = associate_mouthings("v", dets, {{"v", "berkeley", 1.5, 0.9}}, subs);
    REQUIRE(r.size() == 3);
    CHECK(render(*r[0].word_label) == "berkeley");
    CHECK(r[0].source == LabelSource::mouthing);
    CHECK(r[0].confidence == doctest::Approx(0.9));
    CHECK_FALSE(r[1].word_label);
    CHECK(r[1].source == LabelSource::exemplar);
  }
  SUBCASE("spot half a second outside") {
    const auto r = associate_mouthings("v", dets, {{"v", "berkeley", 2.5, 0.9}}, subs);
    CHECK_FALSE(r[0].word_label);
  }
  SUBCASE("highest confidence wins") {
    const auto r =
        associate_mouthings("v", dets, {{"v", "homes", 3.2, 0.6}, {"v", "berkeley", 3.6, 0.3}}, subs);
    CHECK(render(*r[1].word_label) == "homes");
  }
  SUBCASE("confidence threshold, POS filter, subtitle overlap and video") {
    CHECK_FALSE(associate_mouthings("v", dets, {{"v", "berkeley", 1.5, 0.1}}, subs)[0].word_label);
    CHECK_FALSE(associate_mouthings("v", dets, {{"v", "went", 1.5, 0.9}}, subs)[0].word_label);
    CHECK_FALSE(associate_mouthings("v", dets, {{"v", "sarah", 6.5, 0.9}}, subs)[2].word_label);
    CHECK_FALSE(associate_mouthings("v", dets, {{"w", "berkeley", 1.5, 0.9}}, subs)[0].word_label);
    AssociationParams proper;
    proper.pos_filter = PosFilter::proper_nouns;
    CHECK_FALSE(associate_mouthings("v", dets, {{"v", "homes", 1.5, 0.9}}, subs, proper)[0].word_label);
  }
}

// ---------------------------------------------------------------------------
// pseudolabels

TEST_CASE("pseudolabel examples") {
  PseudolabelParams p;
  CHECK(extract_pseudolabel_intervals(Vector::Constant(8, 0.5), p).empty());

  Vector one(5);
  one << 0, 0, 0.9, 0, 0;
  CHECK(moving_max(one, 5).isApprox(Vector::Constant(5, 0.9)));
  CHECK(extract_pseudolabel_intervals(one, p) == std::vector<StepRange>{{0, 5}});

  Vector two(6);
  two << 0.8, 0.8, 0.1, 0.1, 0.8, 0.8;
  p.K = 1;
  CHECK(extract_pseudolabel_intervals(two, p) == std::vector<StepRange>{{0, 2}, {4, 6}});
}

TEST_CASE("pseudolabel parameter checks") {
  PseudolabelParams p;
  p.t2 = 0.8;
  CHECK_THROWS_AS(extract_pseudolabel_intervals(Vector::Zero(3), p), ConfigError);
  p = {};
  p.K = 4;
  CHECK_THROWS_AS(extract_pseudolabel_intervals(Vector::Zero(3), p), ConfigError);
}

TEST_CASE("pseudolabels agree with the brute-force definition") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = 1 + static_cast<int>(rng() % 30);
    Vector s(T);
    std::vector<double> raw(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) raw[static_cast<std::size_t>(t)] = s(t) = u(rng) * u(rng);
    const auto got = extract_pseudolabel_intervals(s, {});
    const auto want = oracle::pseudolabel_intervals(raw, 0.7, 0.3, 5);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].begin == want[i].first);
      CHECK(got[i].end == want[i].second);
    }
  }
}

// ---------------------------------------------------------------------------
// proximity score

TEST_CASE("proximity rule examples") {
  CHECK(collapse_repeats("harry") == "hary");

  const auto hry = proximity_breakdown("HARRY", "HRY");
  CHECK(hry.foreign_letters == 0.0);
  CHECK(hry.first_letter_bonus == -1.0);
  CHECK(hry.alignment == 0.0);
  CHECK(hry.missing_fraction == doctest::Approx(0.25));
  CHECK(proximity_score("HARRY", "HRY") == doctest::Approx(-0.75));

  CHECK(proximity_breakdown("HARY", "HERY").foreign_letters == 1.0);
  CHECK(proximity_breakdown("HARY", "HYR").alignment == 1.0);
}

TEST_CASE("proximity of identical words is the first-letter bonus") {
  for (const char* w : {"sarah", "berkeley", "x", "atlantic"}) CHECK(proximity_score(w, w) == -1.0);
  CHECK_THROWS_AS(proximity_score("sarah", "!!"), EmptyAfterNormalization);
}

TEST_CASE("subtitle matching") {
  const std::vector<SubtitleCandidate> cands{{"homes", PosTag::noun, 0}, {"Berkeley", PosTag::propn, 1}};
  const auto m = match_decoding_to_subtitles(encode_word("berey"), cands);
  REQUIRE(m);
  CHECK(m->word == "berkeley");

  const auto exact = match_decoding_to_subtitles(encode_word("homes"), cands);
  REQUIRE(exact);
  CHECK(exact->word == "homes");
  CHECK(exact->score <= -1.0);

  CHECK_FALSE(match_decoding_to_subtitles(encode_word("qqq"), cands));
  CHECK_FALSE(match_decoding_to_subtitles(encode_word("berey"), {}));
}

TEST_CASE("subtitle matching ties go to the earliest candidate") {
  const std::vector<SubtitleCandidate> cands{{"abc", PosTag::noun, 0}, {"abd", PosTag::noun, 1}};
  // "ab" scores the same against both
  const auto m = match_decoding_to_subtitles(encode_word("ab"), cands);
  REQUIRE(m);
  CHECK(m->word == "abc");
}

TEST_CASE("neighboring subtitles and candidates") {
  const std::vector<SubtitleRecord> subs{
      subtitle(0, 2, {{"Alpha", PosTag::propn}}),  subtitle(3, 5, {{"bravo", PosTag::noun}}),
      subtitle(6, 8, {{"Charlie", PosTag::propn}}), subtitle(9, 11, {{"delta", PosTag::noun}}),
      subtitle(12, 14, {{"echo", PosTag::other}})};
  const auto n = neighboring_subtitles(subs, {6.5, 7.5});
  REQUIRE(n.size() == 3);
  CHECK(n[0].tokens[0].word == "bravo");
  CHECK(n[2].tokens[0].word == "delta");
  // midpoint 5.3 falls between subtitles; the nearest is the one ending at 5
  const auto between = neighboring_subtitles(subs, {5.2, 5.4});
  CHECK(between[1].tokens[0].word == "bravo");
  CHECK(neighboring_subtitles(subs, {0.1, 0.2}).size() == 2);

  const auto nouns = candidate_words(n, PosFilter::nouns);
  CHECK(nouns.size() == 3);
  CHECK(candidate_words(n, PosFilter::proper_nouns).size() == 1);
}

// ---------------------------------------------------------------------------
// hypothesis sets

TEST_CASE("hypothesis sets") {
  const std::vector<SubtitleRecord> subs{
      subtitle(0, 2, {{"Sarah", PosTag::propn}, {"Jane", PosTag::propn}, {"went", PosTag::other}})};
  HypothesisOptions with_ngrams{false, true};
  CHECK(rendered(build_hypothesis_set(subs, HypothesisMode::stage1, with_ngrams)) ==
        std::set<std::string>{"sarah", "jane", "sarahjane"});

  CHECK_THROWS_AS(build_hypothesis_set(subs, HypothesisMode::stage2, with_ngrams, encode_word("xz")),
                  EmptyHypothesisSet);
  CHECK(rendered(build_hypothesis_set(subs, HypothesisMode::stage2, with_ngrams, encode_word("sry"))) ==
        std::set<std::string>{"sarah", "sarahjane"});
  CHECK_THROWS_AS(build_hypothesis_set(subs, HypothesisMode::stage2, with_ngrams), ConfigError);
}

TEST_CASE("hypothesis set defaults and the existing label") {
  const std::vector<SubtitleRecord> subs{
      subtitle(0, 2, {{"Sarah", PosTag::propn}, {"house", PosTag::noun}, {"Jane", PosTag::propn}})};
  CHECK(rendered(build_hypothesis_set(subs, HypothesisMode::stage1, default_hypothesis_options(HypothesisMode::stage1))) ==
        std::set<std::string>{"sarah", "jane"});
  const auto s2 = build_hypothesis_set(subs, HypothesisMode::stage2, default_hypothesis_options(HypothesisMode::stage2),
                                       encode_word("hs"));
  CHECK(rendered(s2) == std::set<std::string>{"sarah", "house"});

  const auto with_label = build_hypothesis_set(subs, HypothesisMode::stage1, {}, std::nullopt, encode_word("zzz"));
  CHECK(render(with_label.candidates()[0]) == "zzz");
  CHECK(with_label.provenance()[0] == HypothesisSource::mouthing);

  CHECK_THROWS_AS(build_hypothesis_set({subtitle(0, 1, {{"went", PosTag::other}})}, HypothesisMode::stage1, {}),
                  EmptyHypothesisSet);
}

TEST_CASE("mh target selector") {
  HypothesisSet full;
  full.add(encode_word("sarah"), HypothesisSource::mouthing);
  full.add(encode_word("jane"), HypothesisSource::proper_noun);
  const auto label = encode_word("sarah");

  std::mt19937_64 rng(1);
  int singles = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto h = mh_target_selector(label, full, rng);
    if (h.size() == 1) {
      ++singles;
      CHECK(h.candidates()[0] == label);
    } else {
      CHECK(h.size() == 2);
    }
  }
  CHECK(singles >= 0.47 * n);
  CHECK(singles <= 0.53 * n);

  for (int i = 0; i < 100; ++i) CHECK(mh_target_selector(std::nullopt, full, rng).size() == 2);

  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 100; ++i)
    CHECK(mh_target_selector(label, full, a).size() == mh_target_selector(label, full, b).size());
}

TEST_CASE("annotation summary") {
  std::vector<AnnotationRecord> recs(3);
  recs[0].video_id = recs[1].video_id = recs[2].video_id = "v";
  recs[0].interval = {0, 1};
  recs[1].interval = {2, 4};
  recs[2].interval = {5, 8};
  recs[1].word_label = encode_word("ab");
  recs[1].source = LabelSource::mouthing;
  recs[2].word_label = encode_word("ab");
  recs[2].source = LabelSource::pseudolabel;
  const auto rows = summarize_annotations(recs);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "detections");
  CHECK(rows[0].count == 3);
  CHECK(rows[0].mean_duration == doctest::Approx(2.0));
  CHECK(rows[1].name == "labeled");
  CHECK(rows[1].count == 2);
  CHECK(rows[1].vocab == 1);
  CHECK(rows[2].name == "labeled:mouthing");
  CHECK(rows[3].name == "labeled:pseudolabel");
}
