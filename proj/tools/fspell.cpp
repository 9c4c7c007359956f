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

// fspell command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fspell/decode.hpp"
#include "fspell/io.hpp"
#include "fspell/pipeline.hpp"
#include "fspell/review.hpp"
#include "fspell/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct GlobalOptions {
  std::string config_file;
  std::string corpus;
  std::string workdir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> sets;  // dotted.key=value overrides
  bool force = false;
  bool quiet = false;
};

// "a.b=1" -> {"a": {"b": 1}}; values that are not JSON become strings.
json overrides_json(const std::vector<std::string>& sets) {
  json root = json::object();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw fspell::ConfigError("--set expects key=value, got \"" + s + "\"");
    const std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &root;
    std::size_t start = 0;
    for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
      node = &(*node)[key.substr(start, dot - start)];
      if (!node->is_object()) *node = json::object();
    }
    (*node)[key.substr(start)] = value;
  }
  return root;
}

// Defaults < config file < FSPELL_WORKDIR < flags.
fspell::PipelineConfig effective_config(const GlobalOptions& g) {
  fspell::PipelineConfig c;
  if (!g.config_file.empty()) c = fspell::load_pipeline_config(g.config_file, c);
  if (const char* env = std::getenv("FSPELL_WORKDIR"); env && *env) c.workdir = env;
  if (!g.sets.empty()) c = fspell::pipeline_config_from_json(overrides_json(g.sets).dump(), c);
  if (!g.corpus.empty()) c.corpus = g.corpus;
  if (!g.workdir.empty()) c.workdir = g.workdir;
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  c.validate();
  return c;
}

fspell::Pipeline make_pipeline(const GlobalOptions& g) {
  auto cfg = effective_config(g);
  fspell::Pipeline p(cfg, [quiet = g.quiet](const std::string& msg) {
    if (!quiet) std::cerr << "[fspell] " << msg << "\n";
  });
  p.set_force(g.force);
  return p;
}

fs::path checkpoint_path(const fspell::Pipeline& p, const std::string& arg) {
  for (const auto* name : {fspell::kStage1Ctc, fspell::kStage1Mh, fspell::kStage2Ctc, fspell::kStage2Mh}) {
    const std::string n = name;
    if (arg == n) return p.path(n.substr(0, 6) + "/" + n.substr(7) + ".ckpt");
  }
  return arg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fingerspelling detection and recognition toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_file, "Pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--corpus", g.corpus, "Corpus manifest.json");
  app.add_option("--workdir", g.workdir, "Working directory (default: $FSPELL_WORKDIR, then config)");
  app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--workers", g.workers, "Worker threads for per-video passes");
  app.add_option("--set", g.sets, "Override a config key, e.g. --set stage1_ctc.epochs=5");
  app.add_flag("--force", g.force, "Rerun steps even when the state file marks them done");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus");
  std::string gen_out = "corpus", gen_config;
  std::vector<std::string> gen_sets;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--synth-config", gen_config, "Generator config JSON")->check(CLI::ExistingFile);
  gen->add_option("--param", gen_sets, "Generator override, e.g. --param corruption_rate=0.3");

  auto* detect = app.add_subcommand("detect-exemplar", "Stage 1: exemplar similarity detection");
  auto* annotate = app.add_subcommand("annotate", "Stage 1: attach mouthing labels to detections");
  auto* train = app.add_subcommand("train", "Train one step: stage1.ctc, stage1.mh, stage2.ctc or stage2.mh");
  std::string train_step;
  train->add_option("step", train_step)->required()->check(
      CLI::IsMember({fspell::kStage1Ctc, fspell::kStage1Mh, fspell::kStage2Ctc, fspell::kStage2Mh}));
  auto* pseudo = app.add_subcommand("pseudolabel", "Stage 2: localization pseudolabels and decodings");
  auto* relabel = app.add_subcommand("relabel", "Stage 2: match decodings to subtitle words");
  auto* stage1 = app.add_subcommand("stage1", "detect-exemplar, annotate, train stage1.ctc and stage1.mh");
  auto* stage2 = app.add_subcommand("stage2", "pseudolabel, relabel, train stage2.ctc and stage2.mh");
  auto* run_all = app.add_subcommand("run-all", "Both stages, evaluation of every checkpoint and the report");

  auto* eval = app.add_subcommand("evaluate", "CER of a checkpoint on the test split or a test set");
  std::string eval_ckpt, eval_testset, eval_name;
  eval->add_option("checkpoint", eval_ckpt, "Checkpoint file or step name")->required();
  eval->add_option("--testset", eval_testset, "Annotation records to evaluate on")->check(CLI::ExistingFile);
  eval->add_option("--name", eval_name, "Report name under <workdir>/eval");

  auto* decode = app.add_subcommand("decode", "Beam-decode a feature file or a span of it");
  std::string dec_ckpt, dec_features;
  std::optional<double> dec_start, dec_end;
  int dec_beam = fspell::kDefaultBeamWidth;
  decode->add_option("checkpoint", dec_ckpt)->required();
  decode->add_option("features", dec_features)->required()->check(CLI::ExistingFile);
  decode->add_option("--start", dec_start, "Span start, seconds");
  decode->add_option("--end", dec_end, "Span end, seconds");
  decode->add_option("--beam", dec_beam, "Beam width")->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve-review", "Serve candidates for human verification");
  std::string srv_candidates, srv_ckpt, srv_static, srv_host = "127.0.0.1", srv_dir;
  int srv_port = 8080;
  serve->add_option("--candidates", srv_candidates, "Annotation records to review")->required()->check(CLI::ExistingFile);
  serve->add_option("--checkpoint", srv_ckpt, "Model for score timelines and decodings");
  serve->add_option("--static", srv_static, "UI asset directory");
  serve->add_option("--host", srv_host);
  serve->add_option("--port", srv_port);
  serve->add_option("--review-dir", srv_dir, "Verdict storage (default <workdir>/review)");

  auto* exp = app.add_subcommand("export-testset", "Write accepted review verdicts as a test set");
  std::string exp_dir, exp_out;
  exp->add_option("--review-dir", exp_dir, "Verdict storage (default <workdir>/review)");
  exp->add_option("--out", exp_out, "Output file (default <workdir>/testset.jsonl)");

  auto* report = app.add_subcommand("report", "Annotation summaries, detection IoU and checkpoint lineage");
  auto* show = app.add_subcommand("show-config", "Print the effective pipeline config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      fspell::SynthConfig sc;
      json j = gen_config.empty() ? json::object() : json::parse(fspell::read_text_file(gen_config));
      j.merge_patch(overrides_json(gen_sets));
      if (g.seed) j["seed"] = *g.seed;
      sc = fspell::synth_config_from_json(j.dump());
      const auto manifest = fspell::write_corpus(fspell::generate_corpus(sc), gen_out);
      std::cout << manifest.string() << "\n";
    } else if (*show) {
      std::cout << fspell::pipeline_config_to_json(effective_config(g)) << "\n";
    } else if (*decode) {
      const auto ck = fspell::load_checkpoint(dec_ckpt);
      fspell::FeatureSequence seq = fspell::read_feature_file(dec_features);
      if (dec_start || dec_end)
        seq = seq.slice(fspell::Interval{dec_start.value_or(seq.start_time), dec_end.value_or(seq.end_time())});
      if (seq.steps() > ck.params.config().max_T)
        throw fspell::ConfigError("span has " + std::to_string(seq.steps()) + " steps, model max_T is " +
                                  std::to_string(ck.params.config().max_T) + "; pass --start/--end");
      if (seq.steps() == 0) throw fspell::ConfigError("empty span");
      const auto out = fspell::forward(ck.params, seq);
      const fspell::Alphabet alphabet;
      std::cout << alphabet.render(fspell::beam_decode(out.rec_logprobs, dec_beam)) << "\n";
    } else if (*exp) {
      const auto cfg = effective_config(g);
      const fs::path dir = exp_dir.empty() ? cfg.workdir / "review" : fs::path(exp_dir);
      const fs::path out = exp_out.empty() ? cfg.workdir / "testset.jsonl" : fs::path(exp_out);
      const fs::path verified = dir / "verified.jsonl";
      if (!fs::exists(verified)) throw fspell::ConfigError("no verdicts found at " + verified.string());
      std::vector<fspell::AnnotationRecord> keep;
      for (auto& r : fspell::read_annotations(verified))
        if (r.verified && r.source == fspell::LabelSource::manual) keep.push_back(std::move(r));
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      fspell::write_annotations(keep, out);
      std::cout << keep.size() << " records -> " << out.string() << "\n";
    } else {
      auto p = make_pipeline(g);
      if (*detect) p.detect_exemplar();
      else if (*annotate) p.annotate();
      else if (*train) p.train_step(train_step);
      else if (*pseudo) p.pseudolabel();
      else if (*relabel) p.relabel();
      else if (*stage1) p.run_stage1();
      else if (*stage2) p.run_stage2();
      else if (*run_all) p.run_all();
      else if (*report) std::cout << p.report();
      else if (*eval) {
        const fs::path ck = checkpoint_path(p, eval_ckpt);
        const auto rep = p.evaluate(ck, eval_testset.empty() ? std::nullopt : std::optional<fs::path>(eval_testset));
        std::string name = eval_name;
        if (name.empty()) name = ck == fs::path(eval_ckpt) ? ck.stem().string() : eval_ckpt;
        p.write_evaluation(name, rep);
        std::cout << fspell::report_table(rep);
      } else if (*serve) {
        const auto& corpus = p.corpus();
        std::optional<fspell::Checkpoint> ck;
        if (!srv_ckpt.empty()) ck = fspell::load_checkpoint(checkpoint_path(p, srv_ckpt));
        auto items = fspell::build_review_items(fspell::read_annotations(srv_candidates, corpus.alphabet), corpus,
                                                ck ? &ck->params : nullptr, p.config().eval_window);
        fspell::ReviewStore store(srv_dir.empty() ? p.path("review") : fs::path(srv_dir), std::move(items),
                                  corpus.alphabet);
        fspell::ReviewServer server(store, srv_static.empty() ? std::nullopt : std::optional<fs::path>(srv_static));
        const int port = server.bind(srv_host, srv_port);
        std::cerr << "[fspell] reviewing " << store.size() << " items on http://" << srv_host << ":" << port << "\n";
        server.listen();
      }
    }
  } catch (const fspell::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fspell::StageError& e) {
    std::cerr << "step failed: " << e.what() << "\n"
              << "completed steps are recorded in the workdir state file; rerun to resume\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
