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
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fspell/annotation.hpp"
#include "fspell/checkpoint.hpp"
#include "fspell/decode.hpp"
#include "fspell/evaluation.hpp"
#include "fspell/synth.hpp"
#include "fspell/train.hpp"

namespace fspell {

struct PipelineConfig {
  std::filesystem::path corpus;  // manifest.json written by gen-synth
  std::filesystem::path workdir = "work";
  std::uint64_t seed = 1;
  int workers = 1;

  ExemplarParams exemplar;
  AssociationParams association;
  PseudolabelParams pseudolabel;
  double accept_thresh = kDefaultAcceptThreshold;
  PosFilter relabel_filter = PosFilter::nouns;
  HypothesisOptions stage1_hypotheses = default_hypothesis_options(HypothesisMode::stage1);
  HypothesisOptions stage2_hypotheses = default_hypothesis_options(HypothesisMode::stage2);

  int beam_width = kDefaultBeamWidth;
  EvalWindow eval_window;
  bool lookup = false;
  std::size_t lookup_thresh = 1;
  double val_context = 0.5;     // seconds around validation spans
  double decode_context = 0.5;  // seconds around pseudolabel intervals when decoding

  // d_f and c_sym are taken from the corpus.
  ModelConfig model;
  TrainSchedule stage1_ctc;
  TrainSchedule stage1_mh;
  TrainSchedule stage2_ctc;
  TrainSchedule stage2_mh;

  PipelineConfig();
  void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& config);
/// Keys absent from `text` keep the values already in `base`. Unknown keys are errors.
PipelineConfig pipeline_config_from_json(const std::string& text, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Training steps, named as in checkpoints and the stage state file.
inline constexpr const char* kStage1Ctc = "stage1.ctc";
inline constexpr const char* kStage1Mh = "stage1.mh";
inline constexpr const char* kStage2Ctc = "stage2.ctc";
inline constexpr const char* kStage2Mh = "stage2.mh";

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown (the one from the lowest index) after all workers finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Test items from ground-truth records. Evaluation uses the window around
/// each record's midpoint.
std::vector<TestItem> test_items_from_records(const std::vector<AnnotationRecord>& records);

/// Beam-decodes every item's evaluation window and fills in the predictions.
void predict_items(const ModelParams& params, const CorpusFiles& corpus, std::vector<TestItem>& items,
                   const EvalWindow& window, int beam_width, int workers,
                   const std::optional<Lexicon>& lexicon = std::nullopt, std::size_t lookup_thresh = 1);

/// Training clips for one set of annotations on the given videos.
TrainingCorpus make_training_corpus(const CorpusFiles& corpus, const std::vector<std::string>& video_ids,
                                    const std::vector<AnnotationRecord>& records);

/// Videos the automatic annotation steps cover: train and val. Test videos
/// only carry the manual benchmark.
std::vector<std::string> annotated_videos(const CorpusFiles& corpus);

/// Every positive span as a centered clip with `context` seconds either side.
/// Clips longer than max_T are skipped.
std::vector<ClipSample> validation_clips(const TrainingCorpus& corpus, int max_T, double context);

/// Averaged localization scores over the whole video from overlapping model windows.
Vector localization_track(const ModelParams& params, const FeatureSequence& video);

/// Each maximal run of the smoothed track >= t2 is a window; it is kept when its
/// raw peak exceeds t1.
std::vector<StepRange> pseudolabel_track(const Vector& track, const PseudolabelParams& params);

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::function<void(const std::string&)> progress = {});
  ~Pipeline();
  Pipeline(Pipeline&&) noexcept;
  Pipeline& operator=(Pipeline&&) noexcept;

  const PipelineConfig& config() const { return config_; }
  const CorpusFiles& corpus();

  std::filesystem::path path(const std::string& relative) const { return config_.workdir / relative; }

  // Individual steps. Each reads its inputs from the workdir and is skipped
  // when the state file shows it done with unchanged inputs, unless forced.
  void detect_exemplar();
  void annotate();
  void train_step(const std::string& name);
  void pseudolabel();
  void relabel();

  void run_stage1();
  void run_stage2();
  void run_all();

  /// Evaluates a checkpoint on the test split (or on `testset`, annotation records).
  CERReport evaluate(const std::filesystem::path& checkpoint,
                     const std::optional<std::filesystem::path>& testset = std::nullopt);
  /// Writes eval/<name>.{json,txt,csv,plot.csv} and returns the JSON path.
  std::filesystem::path write_evaluation(const std::string& name, const CERReport& report);

  /// Annotation summaries, detection IoU against synthetic ground truth and
  /// checkpoint lineage, as JSON.
  std::string report();

  void set_force(bool force) { force_ = force; }

 private:
  struct State;

  bool done(const std::string& step, const std::vector<std::filesystem::path>& inputs);
  void mark_done(const std::string& step, const std::vector<std::filesystem::path>& inputs,
                 const std::vector<std::filesystem::path>& outputs);
  template <typename F>
  void run_step(const std::string& step, const std::vector<std::filesystem::path>& inputs,
                const std::vector<std::filesystem::path>& outputs, F&& body);
  void log(const std::string& msg) const;

  const TrainSchedule& schedule_for(const std::string& name) const;

  PipelineConfig config_;
  std::function<void(const std::string&)> progress_;
  std::unique_ptr<CorpusFiles> corpus_;
  std::unique_ptr<State> state_;
  bool force_ = false;
};

/// FNV-1a digest of a file's bytes, hex. Empty string when the file is missing.
std::string file_digest(const std::filesystem::path& path);

}  // namespace fspell
