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

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fspell/types.hpp"

namespace fspell {

// ---------------------------------------------------------------------------
// Stage 1: exemplar similarity detection

/// E x d_f single-frame fingerspelling exemplars.
struct ExemplarBank {
  FeatureMatrix features;

  int size() const { return static_cast<int>(features.rows()); }
  void validate() const;  // non-empty, every row with nonzero norm
};

/// Per-step boolean mask plus its runs as step ranges and as seconds.
struct DetectionMask {
  std::vector<bool> frames;
  std::vector<StepRange> runs;
  std::vector<Interval> intervals;
};

struct ExemplarParams {
  double sim_thresh = 0.4;   // cosine similarity an exemplar must exceed
  double col_frac = 0.2;     // fraction of exemplars that must exceed sim_thresh
  double min_seg = 0.3;      // seconds; shorter detections are dropped
  double min_gap = 0.3;      // seconds; shorter gaps between detections are filled
};

/// Fraction of exemplars whose cosine similarity with each frame exceeds sim_thresh.
Vector exemplar_scores(const FeatureSequence& features, const ExemplarBank& bank, double sim_thresh);

DetectionMask exemplar_detect(const FeatureSequence& features, const ExemplarBank& bank,
                              const ExemplarParams& params = {});

/// Runs of true values in a mask, in order.
std::vector<StepRange> mask_runs(const std::vector<bool>& mask);
/// Fills interior false-runs shorter than min_gap_steps, then clears true-runs
/// shorter than min_seg_steps.
void clean_mask(std::vector<bool>& mask, int min_seg_steps, int min_gap_steps);
DetectionMask make_mask(std::vector<bool> frames, const FeatureSequence& timing);

// ---------------------------------------------------------------------------
// Stage 1: mouthing labels

enum class PosFilter { nouns, proper_nouns };

bool pos_matches(PosTag tag, PosFilter filter);

struct AssociationParams {
  PosFilter pos_filter = PosFilter::nouns;
  double conf_min = 0.1;  // spots must be strictly above this
};

/// One record per detection. A detection is labeled with the highest-confidence
/// spot inside it whose word appears with a matching POS tag in a subtitle that
/// overlaps the detection; otherwise it stays unlabeled (source = exemplar).
/// Inputs may mix videos; matching is per video_id.
std::vector<AnnotationRecord> associate_mouthings(const std::string& video_id, const std::vector<Interval>& detections,
                                                  const std::vector<MouthingSpot>& spots,
                                                  const std::vector<SubtitleRecord>& subtitles,
                                                  const AssociationParams& params = {},
                                                  const Alphabet& alphabet = Alphabet());

// ---------------------------------------------------------------------------
// Stage 2: pseudolabels

struct PseudolabelParams {
  double t1 = 0.7;  // window is kept when its peak exceeds t1
  double t2 = 0.3;  // sub-intervals need smoothed scores >= t2
  int K = 5;        // centered moving-maximum width, odd
};

/// Centered moving maximum with windows truncated at the edges.
Vector moving_max(const Vector& scores, int K);

/// Maximal runs of smoothed score >= t2, or nothing if the window peak is <= t1.
std::vector<StepRange> extract_pseudolabel_intervals(const Vector& loc_scores, const PseudolabelParams& params = {});

/// Component costs of the deletion-tolerant subtitle/decoding distance.
struct ProximityBreakdown {
  double foreign_letters = 0.0;     // +1 per decoded letter absent from the subtitle word
  double first_letter_bonus = 0.0;  // -1 when first letters agree
  double alignment = 0.0;           // substitutions and insertions, deletions free
  double missing_fraction = 0.0;    // distinct subtitle letters never decoded / |subtitle word|
  double total() const { return foreign_letters + first_letter_bonus + alignment + missing_fraction; }
};

/// `subtitle_word` is w1, `decoded` is w2; the score is not symmetric. Lower is
/// closer and may be negative. Throws EmptyAfterNormalization.
ProximityBreakdown proximity_breakdown(std::string_view subtitle_word, std::string_view decoded,
                                       const Alphabet& alphabet = Alphabet());
double proximity_score(std::string_view subtitle_word, std::string_view decoded, const Alphabet& alphabet = Alphabet());

/// Collapses adjacent repeated letters (HARRY -> HARY).
std::string collapse_repeats(std::string_view word);

struct SubtitleCandidate {
  std::string word;  // as written in the subtitle
  PosTag pos = PosTag::other;
  std::size_t position = 0;  // order of appearance, used for tie-breaking
};

/// Subtitle overlapping the midpoint of `interval` (or the nearest one) plus one
/// on each side. `subtitles` must belong to one video; order does not matter.
std::vector<SubtitleRecord> neighboring_subtitles(const std::vector<SubtitleRecord>& subtitles,
                                                  const Interval& interval);

std::vector<SubtitleCandidate> candidate_words(const std::vector<SubtitleRecord>& subtitles, PosFilter filter);

struct SubtitleMatch {
  std::string word;
  double score = 0.0;
};

inline constexpr double kDefaultAcceptThreshold = 0.5;

/// Lowest-scoring candidate if its score is <= accept_thresh. Ties go to the
/// earliest candidate position.
std::optional<SubtitleMatch> match_decoding_to_subtitles(const LabelSequence& decoded,
                                                         const std::vector<SubtitleCandidate>& candidates,
                                                         double accept_thresh = kDefaultAcceptThreshold,
                                                         const Alphabet& alphabet = Alphabet());

// ---------------------------------------------------------------------------
// Hypothesis sets for MH-CTC

enum class HypothesisMode { stage1, stage2 };

struct HypothesisOptions {
  bool include_nouns = false;  // proper nouns are always included
  bool include_ngrams = false;  // concatenated runs of 2-3 consecutive proper nouns
};

/// Defaults per training stage: stage 1 uses proper nouns, stage 2 nouns and proper nouns.
HypothesisOptions default_hypothesis_options(HypothesisMode mode);

/// Stage 2 keeps only candidates sharing at least one letter with `decoded`.
/// `existing_label` is always kept. Throws EmptyHypothesisSet when nothing remains.
HypothesisSet build_hypothesis_set(const std::vector<SubtitleRecord>& subtitles, HypothesisMode mode,
                                   const HypothesisOptions& options,
                                   const std::optional<LabelSequence>& decoded = std::nullopt,
                                   const std::optional<LabelSequence>& existing_label = std::nullopt,
                                   const Alphabet& alphabet = Alphabet());

/// With probability 0.5 the singleton {auto_label}, otherwise the full set.
/// Without an auto label the full set is always returned.
HypothesisSet mh_target_selector(const std::optional<LabelSequence>& auto_label, const HypothesisSet& full,
                                 std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Reporting

struct AnnotationSummaryRow {
  std::string name;
  std::size_t count = 0;
  std::size_t vocab = 0;
  double mean_duration = 0.0;
};

/// Rows "detections", "labeled", then "labeled:<source>" for each source present.
std::vector<AnnotationSummaryRow> summarize_annotations(const std::vector<AnnotationRecord>& records,
                                                        const Alphabet& alphabet = Alphabet());

/// Mean IoU of each ground-truth interval with its best-overlapping detection.
double mean_best_iou(const std::vector<Interval>& truth, const std::vector<Interval>& detections);
double interval_iou(const Interval& a, const Interval& b);

}  // namespace fspell
