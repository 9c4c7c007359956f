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

#include "fspell/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>
#include <thread>

#include <json.hpp>

#include "fspell/decode.hpp"
#include "fspell/io.hpp"
#include "fspell/random.hpp"

namespace fspell {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

PipelineConfig::PipelineConfig() {
  stage1_ctc.stage = TrainStage::stage1;
  stage1_ctc.mode = RecLossMode::ctc;
  stage1_mh.stage = TrainStage::stage1;
  stage1_mh.mode = RecLossMode::mh_ctc;
  stage2_ctc.stage = TrainStage::stage2;
  stage2_ctc.mode = RecLossMode::ctc;
  stage2_mh.stage = TrainStage::stage2;
  stage2_mh.mode = RecLossMode::mh_ctc;
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("pipeline config: " + what);
  };
  require(workers >= 1, "workers must be >= 1");
  require(exemplar.sim_thresh >= -1.0 && exemplar.sim_thresh <= 1.0, "exemplar.sim_thresh must lie in [-1, 1]");
  require(exemplar.col_frac >= 0.0 && exemplar.col_frac <= 1.0, "exemplar.col_frac must lie in [0, 1]");
  require(exemplar.min_seg >= 0.0 && exemplar.min_gap >= 0.0, "exemplar cleanup lengths must be >= 0");
  require(association.conf_min >= 0.0 && association.conf_min <= 1.0, "association.conf_min must lie in [0, 1]");
  require(pseudolabel.t2 < pseudolabel.t1, "pseudolabel.t2 must be below t1");
  require(pseudolabel.t1 >= 0.0 && pseudolabel.t1 <= 1.0 && pseudolabel.t2 >= 0.0, "pseudolabel thresholds in [0, 1]");
  require(pseudolabel.K >= 1 && pseudolabel.K % 2 == 1, "pseudolabel.K must be odd and >= 1");
  require(beam_width >= 1, "beam_width must be >= 1");
  require(eval_window.before >= 0.0 && eval_window.after >= 0.0, "eval window must be non-negative");
  require(val_context >= 0.0 && decode_context >= 0.0, "contexts must be >= 0");
  ModelConfig m = model;
  m.validate();
  for (const auto* s : {&stage1_ctc, &stage1_mh, &stage2_ctc, &stage2_mh}) {
    require(s->batch_size >= 1 && s->epochs >= 1 && s->steps_per_epoch >= 1, "schedules need positive sizes");
    require(s->learning_rate > 0.0 && s->reduced_learning_rate > 0.0, "learning rates must be positive");
    require(s->patience >= 1, "patience must be >= 1");
    require(s->sampler.min_clip_seconds > 0.0 && s->sampler.max_clip_seconds >= s->sampler.min_clip_seconds,
            "bad clip duration range");
    require(s->sampler.positive_rate >= 0.0 && s->sampler.positive_rate <= 1.0, "positive_rate must lie in [0, 1]");
    require(s->sampler.p_drop >= 0.0 && s->sampler.p_drop < 1.0, "p_drop must lie in [0, 1)");
  }
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key: " + where_ + k);
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      j_.at(key).get_to(out);
    } catch (const json::exception& e) {
      throw ConfigError("config key " + where_ + key + ": " + e.what());
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return where_ + key + "."; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string filter_name(PosFilter f) { return f == PosFilter::nouns ? "nouns" : "proper_nouns"; }

PosFilter filter_from(const std::string& s) {
  if (s == "nouns") return PosFilter::nouns;
  if (s == "proper_nouns") return PosFilter::proper_nouns;
  throw ConfigError("pos filter must be \"nouns\" or \"proper_nouns\", got \"" + s + "\"");
}

json schedule_json(const TrainSchedule& s) {
  return {{"mode", s.mode == RecLossMode::mh_ctc ? "mh_ctc" : "ctc"},
          {"batch_size", s.batch_size},
          {"learning_rate", s.learning_rate},
          {"reduced_learning_rate", s.reduced_learning_rate},
          {"patience", s.patience},
          {"epochs", s.epochs},
          {"steps_per_epoch", s.steps_per_epoch},
          {"grad_clip", s.grad_clip},
          {"sampler",
           {{"min_clip_seconds", s.sampler.min_clip_seconds},
            {"max_clip_seconds", s.sampler.max_clip_seconds},
            {"positive_rate", s.sampler.positive_rate},
            {"p_drop", s.sampler.p_drop}}}};
}

void read_schedule(const json& j, const std::string& where, TrainSchedule& s) {
  Reader r(j, where);
  std::string mode = s.mode == RecLossMode::mh_ctc ? "mh_ctc" : "ctc";
  r.get("mode", mode);
  if (mode == "ctc") s.mode = RecLossMode::ctc;
  else if (mode == "mh_ctc") s.mode = RecLossMode::mh_ctc;
  else throw ConfigError(where + "mode must be \"ctc\" or \"mh_ctc\", got \"" + mode + "\"");
  r.get("batch_size", s.batch_size);
  r.get("learning_rate", s.learning_rate);
  r.get("reduced_learning_rate", s.reduced_learning_rate);
  r.get("patience", s.patience);
  r.get("epochs", s.epochs);
  r.get("steps_per_epoch", s.steps_per_epoch);
  r.get("grad_clip", s.grad_clip);
  if (const json* sj = r.child("sampler")) {
    Reader sr(*sj, r.path("sampler"));
    sr.get("min_clip_seconds", s.sampler.min_clip_seconds);
    sr.get("max_clip_seconds", s.sampler.max_clip_seconds);
    sr.get("positive_rate", s.sampler.positive_rate);
    sr.get("p_drop", s.sampler.p_drop);
  }
}

json config_json(const PipelineConfig& c) {
  return {{"corpus", c.corpus.generic_string()},
          {"workdir", c.workdir.generic_string()},
          {"seed", c.seed},
          {"workers", c.workers},
          {"exemplar",
           {{"sim_thresh", c.exemplar.sim_thresh},
            {"col_frac", c.exemplar.col_frac},
            {"min_seg", c.exemplar.min_seg},
            {"min_gap", c.exemplar.min_gap}}},
          {"association", {{"pos_filter", filter_name(c.association.pos_filter)}, {"conf_min", c.association.conf_min}}},
          {"pseudolabel", {{"t1", c.pseudolabel.t1}, {"t2", c.pseudolabel.t2}, {"K", c.pseudolabel.K}}},
          {"accept_thresh", c.accept_thresh},
          {"relabel_filter", filter_name(c.relabel_filter)},
          {"stage1_hypotheses",
           {{"include_nouns", c.stage1_hypotheses.include_nouns},
            {"include_ngrams", c.stage1_hypotheses.include_ngrams}}},
          {"stage2_hypotheses",
           {{"include_nouns", c.stage2_hypotheses.include_nouns},
            {"include_ngrams", c.stage2_hypotheses.include_ngrams}}},
          {"beam_width", c.beam_width},
          {"eval_window", {{"before", c.eval_window.before}, {"after", c.eval_window.after}}},
          {"lookup", c.lookup},
          {"lookup_thresh", c.lookup_thresh},
          {"val_context", c.val_context},
          {"decode_context", c.decode_context},
          {"model",
           {{"d", c.model.d},
            {"n_layers", c.model.n_layers},
            {"n_heads", c.model.n_heads},
            {"ffn_dim", c.model.ffn_dim},
            {"max_T", c.model.max_T},
            {"dropout", c.model.dropout}}},
          {"stage1_ctc", schedule_json(c.stage1_ctc)},
          {"stage1_mh", schedule_json(c.stage1_mh)},
          {"stage2_ctc", schedule_json(c.stage2_ctc)},
          {"stage2_mh", schedule_json(c.stage2_mh)}};
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& config) { return config_json(config).dump(2); }

PipelineConfig pipeline_config_from_json(const std::string& text, PipelineConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config is not valid JSON: ") + e.what());
  }
  Reader r(j, "");
  std::string corpus = c.corpus.generic_string(), workdir = c.workdir.generic_string();
  r.get("corpus", corpus);
  r.get("workdir", workdir);
  c.corpus = corpus;
  c.workdir = workdir;
  r.get("seed", c.seed);
  r.get("workers", c.workers);
  if (const json* e = r.child("exemplar")) {
    Reader er(*e, "exemplar.");
    er.get("sim_thresh", c.exemplar.sim_thresh);
    er.get("col_frac", c.exemplar.col_frac);
    er.get("min_seg", c.exemplar.min_seg);
    er.get("min_gap", c.exemplar.min_gap);
  }
  if (const json* a = r.child("association")) {
    Reader ar(*a, "association.");
    std::string f = filter_name(c.association.pos_filter);
    ar.get("pos_filter", f);
    c.association.pos_filter = filter_from(f);
    ar.get("conf_min", c.association.conf_min);
  }
  if (const json* p = r.child("pseudolabel")) {
    Reader pr(*p, "pseudolabel.");
    pr.get("t1", c.pseudolabel.t1);
    pr.get("t2", c.pseudolabel.t2);
    pr.get("K", c.pseudolabel.K);
  }
  r.get("accept_thresh", c.accept_thresh);
  std::string rf = filter_name(c.relabel_filter);
  r.get("relabel_filter", rf);
  c.relabel_filter = filter_from(rf);
  for (auto [key, opts] : {std::pair{"stage1_hypotheses", &c.stage1_hypotheses},
                           std::pair{"stage2_hypotheses", &c.stage2_hypotheses}}) {
    if (const json* h = r.child(key)) {
      Reader hr(*h, std::string(key) + ".");
      hr.get("include_nouns", opts->include_nouns);
      hr.get("include_ngrams", opts->include_ngrams);
    }
  }
  r.get("beam_width", c.beam_width);
  if (const json* w = r.child("eval_window")) {
    Reader wr(*w, "eval_window.");
    wr.get("before", c.eval_window.before);
    wr.get("after", c.eval_window.after);
  }
  r.get("lookup", c.lookup);
  r.get("lookup_thresh", c.lookup_thresh);
  r.get("val_context", c.val_context);
  r.get("decode_context", c.decode_context);
  if (const json* m = r.child("model")) {
    Reader mr(*m, "model.");
    mr.get("d", c.model.d);
    mr.get("n_layers", c.model.n_layers);
    mr.get("n_heads", c.model.n_heads);
    mr.get("ffn_dim", c.model.ffn_dim);
    mr.get("max_T", c.model.max_T);
    mr.get("dropout", c.model.dropout);
  }
  for (auto [key, sched] : {std::pair{"stage1_ctc", &c.stage1_ctc}, std::pair{"stage1_mh", &c.stage1_mh},
                            std::pair{"stage2_ctc", &c.stage2_ctc}, std::pair{"stage2_mh", &c.stage2_mh}})
    if (const json* s = r.child(key)) read_schedule(*s, std::string(key) + ".", *sched);
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path, PipelineConfig base) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return pipeline_config_from_json(read_text_file(path), std::move(base));
}

// ---------------------------------------------------------------------------
// Helpers shared by steps and tools

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string file_digest(const fs::path& path) {
  if (!fs::exists(path)) return "";
  const std::string bytes = read_text_file(path);
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

std::vector<TestItem> test_items_from_records(const std::vector<AnnotationRecord>& records) {
  std::vector<TestItem> items;
  for (const auto& r : records) {
    if (!r.word_label || r.word_label->empty() || !r.full_word) continue;
    const std::string word = normalize_word(*r.full_word);
    TestItem item;
    char buf[32];
    std::snprintf(buf, sizeof buf, "@%.2f", r.interval.midpoint());
    item.clip_id = r.video_id + buf;
    item.video_id = r.video_id;
    item.midpoint = r.interval.midpoint();
    item.gt_fspell = *r.word_label;
    item.gt_word = word.empty() ? *r.word_label : encode_word(word);
    items.push_back(std::move(item));
  }
  return items;
}

namespace {

// Keeps at most max_T steps, centered.
FeatureSequence fit_window(const FeatureSequence& video, const Interval& window, int max_T) {
  FeatureSequence clip = video.slice(window);
  if (clip.steps() <= max_T) return clip;
  const int excess = clip.steps() - max_T;
  return clip.slice(excess / 2, excess / 2 + max_T);
}

}  // namespace

void predict_items(const ModelParams& params, const CorpusFiles& corpus, std::vector<TestItem>& items,
                   const EvalWindow& window, int beam_width, int workers, const std::optional<Lexicon>& lexicon,
                   std::size_t lookup_thresh) {
  parallel_for(items.size(), workers, [&](std::size_t i) {
    auto& item = items[i];
    const FeatureSequence clip = fit_window(corpus.video(item.video_id), window.around(item.midpoint),
                                            params.config().max_T);
    if (clip.steps() == 0) throw FormatError("empty evaluation window for " + item.clip_id);
    const ForwardOutput out = forward(params, clip);
    item.prediction = beam_decode(out.rec_logprobs, beam_width);
    if (lexicon && !item.prediction.empty())
      item.prediction = lookup_correct(item.prediction, *lexicon, lookup_thresh, corpus.alphabet);
  });
}

TrainingCorpus make_training_corpus(const CorpusFiles& corpus, const std::vector<std::string>& video_ids,
                                    const std::vector<AnnotationRecord>& records) {
  TrainingCorpus tc;
  for (const auto& id : video_ids) {
    TrainingVideo v;
    v.features = corpus.video(id);
    for (const auto& r : records) {
      if (r.video_id != id) continue;
      PositiveSpan span;
      span.interval = r.interval;
      span.label = r.word_label;
      v.positives.push_back(std::move(span));
    }
    std::sort(v.positives.begin(), v.positives.end(),
              [](const PositiveSpan& a, const PositiveSpan& b) { return a.interval.start < b.interval.start; });
    tc.videos.push_back(std::move(v));
  }
  return tc;
}

Vector localization_track(const ModelParams& params, const FeatureSequence& video) {
  const int T = video.steps();
  const int W = std::min(T, params.config().max_T);
  const int hop = std::max(1, W / 2);
  Vector sum = Vector::Zero(T), count = Vector::Zero(T);
  std::vector<int> starts;
  for (int s = 0; s + W < T; s += hop) starts.push_back(s);
  starts.push_back(T - W);
  for (int s : starts) {
    const ForwardOutput out = forward(params, video.slice(s, s + W));
    sum.segment(s, W) += out.loc_probs;
    count.segment(s, W).array() += 1.0;
  }
  return sum.cwiseQuotient(count);
}

std::vector<StepRange> pseudolabel_track(const Vector& track, const PseudolabelParams& params) {
  if (!(params.t2 < params.t1)) throw ConfigError("pseudolabel thresholds need t2 < t1");
  if (track.size() == 0) return {};
  const Vector smooth = moving_max(track, params.K);
  std::vector<bool> mask(static_cast<std::size_t>(track.size()));
  for (Eigen::Index t = 0; t < track.size(); ++t) mask[static_cast<std::size_t>(t)] = smooth(t) >= params.t2;
  std::vector<StepRange> out;
  for (const auto& run : mask_runs(mask)) {
    const auto r = extract_pseudolabel_intervals(track.segment(run.begin, run.length()), params);
    for (const auto& sub : r) out.push_back({run.begin + sub.begin, run.begin + sub.end});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct Pipeline::State {
  fs::path file;
  json data = json::object();

  void load() {
    data = fs::exists(file) ? json::parse(read_text_file(file)) : json::object();
    if (!data.contains("steps")) data["steps"] = json::object();
  }
  void save() const { write_file_atomic(file, data.dump(2) + "\n"); }
};

Pipeline::Pipeline(PipelineConfig config, std::function<void(const std::string&)> progress)
    : config_(std::move(config)), progress_(std::move(progress)), state_(std::make_unique<State>()) {
  config_.validate();
  state_->file = config_.workdir / "state.json";
}

Pipeline::~Pipeline() = default;
Pipeline::Pipeline(Pipeline&&) noexcept = default;
Pipeline& Pipeline::operator=(Pipeline&&) noexcept = default;

void Pipeline::log(const std::string& msg) const {
  if (progress_) progress_(msg);
}

const CorpusFiles& Pipeline::corpus() {
  if (!corpus_) {
    if (config_.corpus.empty()) throw ConfigError("no corpus manifest configured");
    if (!fs::exists(config_.corpus)) throw ConfigError("corpus manifest not found: " + config_.corpus.string());
    corpus_ = std::make_unique<CorpusFiles>(read_corpus(config_.corpus));
    const auto& c = *corpus_;
    if (c.videos.empty()) throw ConfigError("corpus has no videos");
    config_.model.d_f = c.videos.front().dim();
    config_.model.c_sym = c.alphabet.size();
    config_.model.validate();
  }
  return *corpus_;
}

namespace {

// Only the settings a step reads, so editing a later stage leaves earlier steps done.
std::string config_digest(const PipelineConfig& c, const std::string& step) {
  const json all = config_json(c);
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"stage1.detect", {"exemplar"}},
      {"stage1.annotate", {"association"}},
      {kStage1Ctc, {"seed", "model", "val_context", "stage1_ctc"}},
      {kStage1Mh, {"seed", "model", "val_context", "stage1_mh", "stage1_hypotheses"}},
      {"stage2.pseudolabel", {"pseudolabel", "decode_context", "beam_width"}},
      {"stage2.relabel", {"accept_thresh", "relabel_filter", "association"}},
      {kStage2Ctc, {"seed", "model", "val_context", "stage2_ctc"}},
      {kStage2Mh, {"seed", "model", "val_context", "stage2_mh", "stage2_hypotheses"}},
  };
  json j = json::object();
  if (auto it = keys.find(step); it != keys.end())
    for (const auto& k : it->second) j[k] = all.at(k);
  else
    j = all;
  const std::string s = j.dump();
  return hex64(fnv1a64(s.data(), s.size()));
}

}  // namespace

bool Pipeline::done(const std::string& step, const std::vector<fs::path>& inputs) {
  if (force_) return false;
  state_->load();
  const auto& steps = state_->data["steps"];
  if (!steps.contains(step)) return false;
  const auto& entry = steps[step];
  if (entry.value("config", "") != config_digest(config_, step)) return false;
  for (const auto& in : inputs)
    if (entry["inputs"].value(in.generic_string(), "?") != file_digest(in)) return false;
  for (const auto& [path, digest] : entry["outputs"].items())
    if (file_digest(path) != digest.get<std::string>()) return false;
  return true;
}

void Pipeline::mark_done(const std::string& step, const std::vector<fs::path>& inputs,
                         const std::vector<fs::path>& outputs) {
  state_->load();
  json entry = {{"config", config_digest(config_, step)}, {"inputs", json::object()}, {"outputs", json::object()}};
  for (const auto& in : inputs) entry["inputs"][in.generic_string()] = file_digest(in);
  for (const auto& out : outputs) entry["outputs"][out.generic_string()] = file_digest(out);
  state_->data["steps"][step] = entry;
  state_->save();
}

template <typename F>
void Pipeline::run_step(const std::string& step, const std::vector<fs::path>& inputs,
                        const std::vector<fs::path>& outputs, F&& body) {
  try {
    for (const auto& in : inputs)
      if (!fs::exists(in)) throw StageError(step, "missing input " + in.string() + " (run the earlier steps first)");
    if (done(step, inputs)) {
      log(step + ": up to date");
      return;
    }
    log(step + ": running");
    fs::create_directories(config_.workdir);
    body();
    mark_done(step, inputs, outputs);
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(step, e.what());
  }
}

std::vector<std::string> annotated_videos(const CorpusFiles& corpus) {
  auto ids = corpus.video_ids("train");
  for (auto& id : corpus.video_ids("val")) ids.push_back(std::move(id));
  return ids;
}

void Pipeline::detect_exemplar() {
  const fs::path out = path("stage1/detections.jsonl");
  run_step("stage1.detect", {config_.corpus}, {out}, [&] {
    const auto& c = corpus();
    const auto ids = annotated_videos(c);
    std::vector<std::vector<AnnotationRecord>> per_video(ids.size());
    parallel_for(ids.size(), config_.workers, [&](std::size_t i) {
      const auto mask = exemplar_detect(c.video(ids[i]), c.exemplars, config_.exemplar);
      for (const auto& iv : mask.intervals) {
        AnnotationRecord r;
        r.video_id = ids[i];
        r.interval = iv;
        per_video[i].push_back(std::move(r));
      }
    });
    std::vector<AnnotationRecord> all;
    for (auto& v : per_video) all.insert(all.end(), v.begin(), v.end());
    fs::create_directories(out.parent_path());
    write_annotations(all, out, c.alphabet);
    log("stage1.detect: " + std::to_string(all.size()) + " detections");
  });
}

void Pipeline::annotate() {
  const fs::path in = path("stage1/detections.jsonl");
  const fs::path out = path("stage1/annotations.jsonl");
  run_step("stage1.annotate", {config_.corpus, in}, {out}, [&] {
    const auto& c = corpus();
    const auto detections = read_annotations(in, c.alphabet);
    const auto ids = annotated_videos(c);
    std::vector<std::vector<AnnotationRecord>> per_video(ids.size());
    parallel_for(ids.size(), config_.workers, [&](std::size_t i) {
      std::vector<Interval> dets;
      for (const auto& r : detections)
        if (r.video_id == ids[i]) dets.push_back(r.interval);
      per_video[i] = associate_mouthings(ids[i], dets, c.spots, c.subtitles, config_.association, c.alphabet);
    });
    std::vector<AnnotationRecord> all;
    std::size_t labeled = 0;
    for (auto& v : per_video)
      for (auto& r : v) {
        labeled += r.word_label.has_value();
        all.push_back(std::move(r));
      }
    write_annotations(all, out, c.alphabet);
    log("stage1.annotate: " + std::to_string(labeled) + " of " + std::to_string(all.size()) + " detections labeled");
  });
}

std::vector<ClipSample> validation_clips(const TrainingCorpus& corpus, int max_T, double context) {
  std::vector<ClipSample> clips;
  for (const auto& video : corpus.videos)
    for (const auto& span : video.positives) {
      ClipSample clip = centered_clip(video, span, context);
      if (clip.features.steps() > max_T) continue;
      clips.push_back(std::move(clip));
    }
  return clips;
}

const TrainSchedule& Pipeline::schedule_for(const std::string& name) const {
  if (name == kStage1Ctc) return config_.stage1_ctc;
  if (name == kStage1Mh) return config_.stage1_mh;
  if (name == kStage2Ctc) return config_.stage2_ctc;
  if (name == kStage2Mh) return config_.stage2_mh;
  throw ConfigError("unknown training step " + name);
}

namespace {

struct StepFiles {
  fs::path annotations;
  std::optional<fs::path> parent;
  fs::path checkpoint;
  fs::path log;
};

std::string interval_key(const AnnotationRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "|%.6f|%.6f", r.interval.start, r.interval.end);
  return r.video_id + buf;
}

std::vector<SubtitleRecord> subtitles_of(const std::vector<SubtitleRecord>& all, const std::string& video_id) {
  std::vector<SubtitleRecord> out;
  for (const auto& s : all)
    if (s.video_id == video_id) out.push_back(s);
  return out;
}

}  // namespace

void Pipeline::train_step(const std::string& name) {
  const TrainSchedule& base = schedule_for(name);
  StepFiles f;
  if (name == kStage1Ctc) {
    f = {path("stage1/annotations.jsonl"), std::nullopt, path("stage1/ctc.ckpt"), path("stage1/ctc.log.jsonl")};
  } else if (name == kStage1Mh) {
    f = {path("stage1/annotations.jsonl"), path("stage1/ctc.ckpt"), path("stage1/mh.ckpt"), path("stage1/mh.log.jsonl")};
  } else if (name == kStage2Ctc) {
    f = {path("stage2/annotations.jsonl"), path("stage1/mh.ckpt"), path("stage2/ctc.ckpt"), path("stage2/ctc.log.jsonl")};
  } else {
    f = {path("stage2/annotations.jsonl"), path("stage2/ctc.ckpt"), path("stage2/mh.ckpt"), path("stage2/mh.log.jsonl")};
  }
  std::vector<fs::path> inputs{config_.corpus, f.annotations};
  if (f.parent) inputs.push_back(*f.parent);
  if (name == kStage2Mh) inputs.push_back(path("stage2/pseudolabels.jsonl"));

  run_step(name, inputs, {f.checkpoint, f.log}, [&] {
    const auto& c = corpus();
    const auto records = read_annotations(f.annotations, c.alphabet);
    TrainingCorpus tc = make_training_corpus(c, c.video_ids("train"), records);
    TrainingCorpus vc = make_training_corpus(c, c.video_ids("val"), records);

    if (base.mode == RecLossMode::mh_ctc) {
      const bool stage2 = name == kStage2Mh;
      std::map<std::string, LabelSequence> decoded;
      if (stage2)
        for (const auto& r : read_annotations(path("stage2/pseudolabels.jsonl"), c.alphabet))
          if (r.word_label) decoded[interval_key(r)] = *r.word_label;
      std::size_t with_sets = 0;
      for (auto* corpus_part : {&tc, &vc}) {
        for (auto& video : corpus_part->videos) {
          const auto subs = subtitles_of(c.subtitles, video.features.video_id);
          for (auto& span : video.positives) {
            if (!span.label) continue;
            AnnotationRecord key;
            key.video_id = video.features.video_id;
            key.interval = span.interval;
            std::optional<LabelSequence> dec;
            if (stage2) {
              auto it = decoded.find(interval_key(key));
              if (it == decoded.end()) continue;
              dec = it->second;
            }
            try {
              span.hypotheses = build_hypothesis_set(
                  neighboring_subtitles(subs, span.interval), stage2 ? HypothesisMode::stage2 : HypothesisMode::stage1,
                  stage2 ? config_.stage2_hypotheses : config_.stage1_hypotheses, dec, span.label, c.alphabet);
              with_sets += corpus_part == &tc;
            } catch (const EmptyHypothesisSet&) {
            }
          }
        }
      }
      log(name + ": " + std::to_string(with_sets) + " training spans with hypothesis sets");
    }

    ModelParams init = ModelParams::initialize(config_.model, derive_seed(config_.seed, "init"));
    CheckpointMeta meta;
    meta.stage = name;
    if (f.parent) {
      Checkpoint parent = load_checkpoint(*f.parent);
      if (!(parent.params.config() == config_.model))
        throw ConfigError("model config differs from the parent checkpoint " + f.parent->string());
      init = parent.params;
      meta.parent_digest = parent.digest;
      meta.note = "initialized from " + parent.meta.stage;
    } else {
      meta.note = "initialized from scratch";
    }

    TrainSchedule schedule = base;
    schedule.seed = derive_seed(config_.seed, name);
    const auto val = validation_clips(vc, config_.model.max_T, config_.val_context);
    TrainResult result = train(init, tc, val, schedule, [&](const std::string& line) {
      if (line.find("\"epoch\"") != std::string::npos && line.find("\"val_loss\"") != std::string::npos)
        log(name + ": " + line);
    });

    std::string text;
    for (const auto& l : result.log) text += l + "\n";
    fs::create_directories(f.checkpoint.parent_path());
    write_file_atomic(f.log, text);
    meta.note += "; best epoch " + std::to_string(result.best_epoch);
    save_checkpoint(f.checkpoint, result.best, meta);
  });
}

void Pipeline::pseudolabel() {
  const fs::path ckpt = path("stage1/mh.ckpt");
  const fs::path out = path("stage2/pseudolabels.jsonl");
  run_step("stage2.pseudolabel", {config_.corpus, ckpt}, {out}, [&] {
    const auto& c = corpus();
    const Checkpoint model = load_checkpoint(ckpt);
    const auto ids = annotated_videos(c);
    std::vector<std::vector<AnnotationRecord>> per_video(ids.size());
    parallel_for(ids.size(), config_.workers, [&](std::size_t i) {
      const FeatureSequence& video = c.video(ids[i]);
      const Vector track = localization_track(model.params, video);
      for (const auto& run : pseudolabel_track(track, config_.pseudolabel)) {
        AnnotationRecord r;
        r.video_id = ids[i];
        r.interval = video.interval_of(run);
        r.source = LabelSource::pseudolabel;
        r.confidence = track.segment(run.begin, run.length()).maxCoeff();
        const Interval ctx{r.interval.start - config_.decode_context, r.interval.end + config_.decode_context};
        const FeatureSequence clip = fit_window(video, ctx, model.params.config().max_T);
        const LabelSequence decoded = beam_decode(forward(model.params, clip).rec_logprobs, config_.beam_width);
        if (!decoded.empty()) r.word_label = decoded;
        per_video[i].push_back(std::move(r));
      }
    });
    std::vector<AnnotationRecord> all;
    for (auto& v : per_video) all.insert(all.end(), v.begin(), v.end());
    fs::create_directories(out.parent_path());
    write_annotations(all, out, c.alphabet);
    log("stage2.pseudolabel: " + std::to_string(all.size()) + " intervals");
  });
}

void Pipeline::relabel() {
  const fs::path in = path("stage2/pseudolabels.jsonl");
  const fs::path out = path("stage2/annotations.jsonl");
  run_step("stage2.relabel", {config_.corpus, in}, {out}, [&] {
    const auto& c = corpus();
    const auto pseudo = read_annotations(in, c.alphabet);
    std::vector<AnnotationRecord> all(pseudo.size());
    std::atomic<std::size_t> matched = 0;
    parallel_for(pseudo.size(), config_.workers, [&](std::size_t i) {
      AnnotationRecord r = pseudo[i];
      r.word_label.reset();
      r.full_word.reset();
      if (pseudo[i].word_label) {
        const auto subs = subtitles_of(c.subtitles, r.video_id);
        const auto m = match_decoding_to_subtitles(
            *pseudo[i].word_label, candidate_words(neighboring_subtitles(subs, r.interval), config_.relabel_filter),
            config_.accept_thresh, c.alphabet);
        if (m) {
          r.word_label = encode_word(m->word, c.alphabet);
          r.full_word = m->word;
          ++matched;
        }
      }
      all[i] = std::move(r);
    });
    write_annotations(all, out, c.alphabet);
    log("stage2.relabel: " + std::to_string(matched) + " of " + std::to_string(all.size()) +
        " intervals matched to subtitle words");
  });
}

void Pipeline::run_stage1() {
  detect_exemplar();
  annotate();
  train_step(kStage1Ctc);
  train_step(kStage1Mh);
}

void Pipeline::run_stage2() {
  if (!fs::exists(path("stage1/mh.ckpt"))) throw StageError("stage2", "stage-1 checkpoint missing; run stage1 first");
  pseudolabel();
  relabel();
  train_step(kStage2Ctc);
  train_step(kStage2Mh);
}

void Pipeline::run_all() {
  run_stage1();
  run_stage2();
  for (const auto* name : {kStage1Ctc, kStage1Mh, kStage2Ctc, kStage2Mh}) {
    const std::string n = name;
    const fs::path ckpt = path(n.substr(0, 6) + "/" + n.substr(7) + ".ckpt");
    write_evaluation(n, evaluate(ckpt));
  }
  report();
}

CERReport Pipeline::evaluate(const fs::path& checkpoint, const std::optional<fs::path>& testset) {
  try {
    const auto& c = corpus();
    if (!fs::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint.string());
    const Checkpoint model = load_checkpoint(checkpoint);
    std::vector<AnnotationRecord> records;
    if (testset) {
      records = read_annotations(*testset, c.alphabet);
    } else {
      const auto ids = c.video_ids("test");
      for (const auto& r : c.ground_truth)
        if (std::find(ids.begin(), ids.end(), r.video_id) != ids.end()) records.push_back(r);
    }
    auto items = test_items_from_records(records);
    std::optional<Lexicon> lexicon;
    if (config_.lookup) {
      lexicon.emplace();
      for (const auto& e : c.lexicon)
        if (e.pos != PosTag::other && e.frequency > 0) (*lexicon)[e.word] = e.frequency;
      if (lexicon->empty()) throw ConfigError("lookup correction enabled but the lexicon has no nouns");
    }
    predict_items(model.params, c, items, config_.eval_window, config_.beam_width, config_.workers, lexicon,
                  config_.lookup_thresh);
    return evaluate_predictions(items, c.alphabet);
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("evaluate", e.what());
  }
}

fs::path Pipeline::write_evaluation(const std::string& name, const CERReport& report) {
  const fs::path dir = path("eval");
  fs::create_directories(dir);
  write_file_atomic(dir / (name + ".json"), report_json(report) + "\n");
  write_file_atomic(dir / (name + ".txt"), report_table(report));
  write_file_atomic(dir / (name + ".csv"), report_csv(report));
  write_file_atomic(dir / (name + ".plot.csv"), report_plot_data(report));
  log("evaluate " + name + ": CER_fspell " + std::to_string(report.cer_fspell) + ", CER_word " +
      std::to_string(report.cer_word));
  return dir / (name + ".json");
}

std::string Pipeline::report() {
  const auto& c = corpus();
  const auto annotated = annotated_videos(c);
  auto detection_iou = [&](const std::vector<AnnotationRecord>& records) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& id : annotated) {
      std::vector<Interval> truth, dets;
      for (const auto& r : c.ground_truth)
        if (r.video_id == id) truth.push_back(r.interval);
      for (const auto& r : records)
        if (r.video_id == id) dets.push_back(r.interval);
      total += mean_best_iou(truth, dets) * static_cast<double>(truth.size());
      n += truth.size();
    }
    return n ? total / static_cast<double>(n) : 0.0;
  };
  auto summary = [&](const fs::path& file) -> json {
    if (!fs::exists(file)) return nullptr;
    const auto records = read_annotations(file, c.alphabet);
    json rows = json::array();
    std::size_t labeled = 0;
    for (const auto& r : records) labeled += r.word_label.has_value();
    for (const auto& row : summarize_annotations(records, c.alphabet))
      rows.push_back({{"name", row.name}, {"count", row.count}, {"vocab", row.vocab},
                      {"mean_duration", row.mean_duration}});
    return {{"file", file.generic_string()},
            {"rows", rows},
            {"label_coverage", records.empty() ? 0.0 : static_cast<double>(labeled) / records.size()},
            {"detection_iou_vs_synthetic_gt", detection_iou(records)}};
  };

  json checkpoints = json::array();
  for (const auto* f : {"stage1/ctc.ckpt", "stage1/mh.ckpt", "stage2/ctc.ckpt", "stage2/mh.ckpt"}) {
    if (!fs::exists(path(f))) continue;
    const Checkpoint ck = load_checkpoint(path(f));
    checkpoints.push_back({{"file", f},
                           {"stage", ck.meta.stage},
                           {"digest", ck.digest},
                           {"parent_digest", ck.meta.parent_digest ? json(*ck.meta.parent_digest) : json(nullptr)},
                           {"note", ck.meta.note}});
  }
  json evals = json::object();
  for (const auto* name : {kStage1Ctc, kStage1Mh, kStage2Ctc, kStage2Mh}) {
    const fs::path f = path(std::string("eval/") + name + ".json");
    if (!fs::exists(f)) continue;
    const json e = json::parse(read_text_file(f));
    evals[name] = {{"cer_fspell", e["cer_fspell"]}, {"cer_word", e["cer_word"]}, {"items", e["items_evaluated"]}};
  }
  const json report = {
      {"stage1_detections", summary(path("stage1/detections.jsonl"))},
      {"stage1_annotations", summary(path("stage1/annotations.jsonl"))},
      {"stage2_pseudolabels", summary(path("stage2/pseudolabels.jsonl"))},
      {"stage2_annotations", summary(path("stage2/annotations.jsonl"))},
      {"checkpoints", checkpoints},
      {"evaluations", evals},
      {"notes",
       {"detection_iou_vs_synthetic_gt is an extra metric against synthetic ground truth",
        "proximity scores are not clamped at 0 and may be negative"}}};
  const std::string text = report.dump(2) + "\n";
  fs::create_directories(config_.workdir);
  write_file_atomic(path("report.json"), text);
  return text;
}

}  // namespace fspell
