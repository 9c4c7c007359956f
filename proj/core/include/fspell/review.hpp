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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fspell/evaluation.hpp"
#include "fspell/model.hpp"
#include "fspell/synth.hpp"

namespace fspell {

enum class VerdictStatus { pending, accepted, rejected };

std::string_view to_string(VerdictStatus s);

struct Verdict {
  VerdictStatus status = VerdictStatus::pending;
  std::string letters;    // exact letters signed, as typed
  std::string full_word;  // intended word
  long revision = 0;      // bumps on every write
};

/// One candidate shown to a reviewer. Timelines cover the evaluation window.
struct ReviewItem {
  std::string id;
  AnnotationRecord candidate;
  Interval window;
  double step_seconds = 0.0;
  std::vector<double> timeline;             // localization score per step, empty without a model
  std::vector<std::vector<float>> heatmap;  // steps x bins, mean feature value per bin
  std::string decoded;
  std::vector<std::string> subtitles;       // neighboring subtitle texts
  std::optional<std::string> mouthing;      // best spot word inside the window
  Verdict verdict;
};

/// Builds review items for candidate records. With a model the items carry
/// localization timelines and beam-decoded letters.
std::vector<ReviewItem> build_review_items(const std::vector<AnnotationRecord>& candidates, const CorpusFiles& corpus,
                                           const ModelParams* model, const EvalWindow& window = {},
                                           int heatmap_bins = 8, int beam_width = 30);

/// Verdict storage for the review service. Persists under `dir`:
///   verdicts.json   id -> verdict
///   verified.jsonl  AnnotationRecords of accepted items (manual, verified)
///   audit.jsonl     one line per submitted verdict, including overwrites
/// Readers run concurrently; writes are serialized. The last write wins.
class ReviewStore {
 public:
  ReviewStore(std::filesystem::path dir, std::vector<ReviewItem> items, Alphabet alphabet = Alphabet());

  std::size_t size() const { return items_.size(); }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  /// {"total", "offset", "limit", "items": [...]} as JSON text.
  std::string page_json(std::size_t offset, std::size_t limit) const;
  std::string item_json(const std::string& id) const;

  struct SubmitResult {
    bool ok = false;
    int status = 200;  // HTTP-style status on failure
    std::string body;  // item JSON or {"error": ...}
  };
  /// Body: {"accept": bool, "letters": str, "full_word": str}.
  SubmitResult submit_json(const std::string& id, const std::string& body);
  SubmitResult submit(const std::string& id, bool accept, const std::string& letters, const std::string& full_word);

  Verdict verdict(const std::string& id) const;
  /// Accepted items as verified manual records, sorted.
  std::vector<AnnotationRecord> verified_records() const;
  /// Writes verified_records() to `path`; returns how many were written.
  std::size_t export_testset(const std::filesystem::path& path) const;

 private:
  void persist_locked() const;

  std::filesystem::path dir_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t> index_;
  Alphabet alphabet_;
  mutable std::shared_mutex mu_;
  long audit_seq_ = 0;
};

/// HTTP front end: static assets plus
///   GET  /items?offset=&limit=
///   GET  /items/{id}
///   POST /items/{id}/verdict
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ReviewServer();

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  /// Throws Error when the port is taken.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// bind() + listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fspell
