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

#include "fspell/review.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fspell/decode.hpp"
#include "fspell/io.hpp"

namespace fspell {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::pending: return "pending";
    case VerdictStatus::accepted: return "accepted";
    case VerdictStatus::rejected: return "rejected";
  }
  return "pending";
}

namespace {

VerdictStatus status_from(const std::string& s) {
  if (s == "accepted") return VerdictStatus::accepted;
  if (s == "rejected") return VerdictStatus::rejected;
  if (s == "pending") return VerdictStatus::pending;
  throw FormatError("unknown verdict status \"" + s + "\"");
}

json verdict_json(const Verdict& v) {
  return {{"status", std::string(to_string(v.status))},
          {"letters", v.letters},
          {"full_word", v.full_word},
          {"revision", v.revision}};
}

json item_to_json(const ReviewItem& it, const Alphabet& alphabet) {
  return {{"id", it.id},
          {"video_id", it.candidate.video_id},
          {"interval", {it.candidate.interval.start, it.candidate.interval.end}},
          {"midpoint", it.candidate.interval.midpoint()},
          {"window", {it.window.start, it.window.end}},
          {"step_seconds", it.step_seconds},
          {"timeline", it.timeline},
          {"heatmap", it.heatmap},
          {"decoded", it.decoded},
          {"candidate_label",
           it.candidate.word_label ? json(alphabet.render(*it.candidate.word_label)) : json(nullptr)},
          {"subtitles", it.subtitles},
          {"mouthing", it.mouthing ? json(*it.mouthing) : json(nullptr)},
          {"verdict", verdict_json(it.verdict)}};
}

json error_json(const std::string& what) { return {{"error", what}}; }

}  // namespace

std::vector<ReviewItem> build_review_items(const std::vector<AnnotationRecord>& candidates, const CorpusFiles& corpus,
                                           const ModelParams* model, const EvalWindow& window, int heatmap_bins,
                                           int beam_width) {
  std::vector<AnnotationRecord> sorted = candidates;
  sort_annotations(sorted);
  std::vector<ReviewItem> items;
  items.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& rec = sorted[i];
    const FeatureSequence& video = corpus.video(rec.video_id);
    FeatureSequence clip = video.slice(window.around(rec.interval.midpoint()));
    if (model && clip.steps() > model->config().max_T) {
      const int excess = clip.steps() - model->config().max_T;
      clip = clip.slice(excess / 2, excess / 2 + model->config().max_T);
    }

    ReviewItem it;
    char buf[32];
    std::snprintf(buf, sizeof buf, "item-%04zu", i);
    it.id = buf;
    it.candidate = rec;
    it.window = {clip.start_time, clip.end_time()};
    it.step_seconds = clip.step_seconds();

    const int bins = std::max(1, std::min(heatmap_bins, clip.dim()));
    for (int t = 0; t < clip.steps(); ++t) {
      std::vector<float> row(static_cast<std::size_t>(bins), 0.0f);
      for (int b = 0; b < bins; ++b) {
        const int lo = b * clip.dim() / bins, hi = (b + 1) * clip.dim() / bins;
        row[static_cast<std::size_t>(b)] = clip.data.row(t).segment(lo, hi - lo).mean();
      }
      it.heatmap.push_back(std::move(row));
    }

    if (model && clip.steps() > 0) {
      const ForwardOutput out = forward(*model, clip);
      it.timeline.assign(out.loc_probs.data(), out.loc_probs.data() + out.loc_probs.size());
      it.decoded = corpus.alphabet.render(beam_decode(out.rec_logprobs, beam_width));
    } else if (rec.word_label) {
      it.decoded = corpus.alphabet.render(*rec.word_label);
    }

    std::vector<SubtitleRecord> subs;
    for (const auto& s : corpus.subtitles)
      if (s.video_id == rec.video_id) subs.push_back(s);
    for (const auto& s : neighboring_subtitles(subs, rec.interval)) it.subtitles.push_back(s.text);

    const MouthingSpot* best = nullptr;
    for (const auto& s : corpus.spots)
      if (s.video_id == rec.video_id && it.window.contains(s.time) && s.confidence > 0.1 &&
          (!best || s.confidence > best->confidence))
        best = &s;
    if (best) it.mouthing = best->word;
    items.push_back(std::move(it));
  }
  return items;
}

ReviewStore::ReviewStore(fs::path dir, std::vector<ReviewItem> items, Alphabet alphabet)
    : dir_(std::move(dir)), items_(std::move(items)), alphabet_(std::move(alphabet)) {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (!index_.emplace(items_[i].id, i).second) throw FormatError("duplicate review item id " + items_[i].id);
  fs::create_directories(dir_);
  const fs::path file = dir_ / "verdicts.json";
  if (fs::exists(file)) {
    try {
      const json j = json::parse(read_text_file(file));
      for (const auto& [id, v] : j.items()) {
        auto it = index_.find(id);
        if (it == index_.end()) continue;
        Verdict& dst = items_[it->second].verdict;
        dst.status = status_from(v.at("status").get<std::string>());
        dst.letters = v.at("letters").get<std::string>();
        dst.full_word = v.at("full_word").get<std::string>();
        dst.revision = v.at("revision").get<long>();
      }
    } catch (const json::exception& e) {
      throw FormatError(file.string() + ": " + e.what());
    }
  }
  const fs::path audit = dir_ / "audit.jsonl";
  if (fs::exists(audit)) {
    std::ifstream in(audit);
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) ++audit_seq_;
  }
}

std::string ReviewStore::page_json(std::size_t offset, std::size_t limit) const {
  std::shared_lock lock(mu_);
  json items = json::array();
  for (std::size_t i = offset; i < items_.size() && i < offset + limit; ++i) items.push_back(item_to_json(items_[i], alphabet_));
  return json{{"total", items_.size()}, {"offset", offset}, {"limit", limit}, {"items", items}}.dump();
}

std::string ReviewStore::item_json(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) throw FormatError("unknown review item " + id);
  return item_to_json(items_[it->second], alphabet_).dump();
}

Verdict ReviewStore::verdict(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) throw FormatError("unknown review item " + id);
  return items_[it->second].verdict;
}

ReviewStore::SubmitResult ReviewStore::submit_json(const std::string& id, const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return {false, 400, error_json("body is not valid JSON").dump()};
  }
  if (!j.is_object() || !j.contains("accept") || !j["accept"].is_boolean())
    return {false, 400, error_json("body needs a boolean \"accept\"").dump()};
  auto text = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::string();
    if (!j[key].is_string()) return std::nullopt;
    return j[key].get<std::string>();
  };
  const auto letters = text("letters"), full_word = text("full_word");
  if (!letters || !full_word) return {false, 400, error_json("letters and full_word must be strings").dump()};
  return submit(id, j["accept"].get<bool>(), *letters, *full_word);
}

ReviewStore::SubmitResult ReviewStore::submit(const std::string& id, bool accept, const std::string& letters,
                                              const std::string& full_word) {
  auto found = index_.find(id);
  if (found == index_.end()) return {false, 404, error_json("unknown item " + id).dump()};
  std::string typed;
  for (char c : letters) {
    const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!alphabet_.contains(lower)) return {false, 400, error_json(std::string("letter '") + c + "' is not in the alphabet").dump()};
    typed.push_back(lower);
  }
  if (accept && typed.empty()) return {false, 400, error_json("accepting needs the signed letters").dump()};
  const std::string word = normalize_word(full_word, alphabet_);

  std::unique_lock lock(mu_);
  ReviewItem& item = items_[found->second];
  const Verdict previous = item.verdict;
  item.verdict.status = accept ? VerdictStatus::accepted : VerdictStatus::rejected;
  item.verdict.letters = typed;
  item.verdict.full_word = accept ? (word.empty() ? typed : word) : word;
  item.verdict.revision = previous.revision + 1;

  const json audit = {{"seq", ++audit_seq_},
                      {"id", id},
                      {"time_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::system_clock::now().time_since_epoch())
                                      .count()},
                      {"verdict", verdict_json(item.verdict)},
                      {"previous", verdict_json(previous)},
                      {"overwrote", previous.status != VerdictStatus::pending}};
  {
    std::ofstream out(dir_ / "audit.jsonl", std::ios::app);
    out << audit.dump() << "\n";
    out.flush();
    if (!out) return {false, 500, error_json("cannot append to the audit log").dump()};
  }
  persist_locked();
  return {true, 200, item_to_json(item, alphabet_).dump()};
}

std::vector<AnnotationRecord> ReviewStore::verified_records() const {
  std::vector<AnnotationRecord> out;
  for (const auto& it : items_) {
    if (it.verdict.status != VerdictStatus::accepted) continue;
    AnnotationRecord r;
    r.video_id = it.candidate.video_id;
    r.interval = it.candidate.interval;
    r.word_label = encode_word(it.verdict.letters, alphabet_);
    r.full_word = it.verdict.full_word;
    r.source = LabelSource::manual;
    r.verified = true;
    out.push_back(std::move(r));
  }
  sort_annotations(out);
  return out;
}

void ReviewStore::persist_locked() const {
  json verdicts = json::object();
  for (const auto& it : items_)
    if (it.verdict.status != VerdictStatus::pending) verdicts[it.id] = verdict_json(it.verdict);
  write_file_atomic(dir_ / "verdicts.json", verdicts.dump(2) + "\n");
  write_annotations(verified_records(), dir_ / "verified.jsonl", alphabet_);
}

std::size_t ReviewStore::export_testset(const fs::path& path) const {
  std::shared_lock lock(mu_);
  const auto records = verified_records();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_annotations(records, path, alphabet_);
  return records.size();
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>fspell review</title></head>"
    "<body><p>No UI assets configured. The JSON API is at <a href=\"/items\">/items</a>.</p></body></html>";

}  // namespace

struct ReviewServer::Impl {
  ReviewStore& store;
  httplib::Server server;
  std::thread thread;
  bool bound = false;

  explicit Impl(ReviewStore& s) : store(s) {}
};

ReviewServer::ReviewServer(ReviewStore& store, std::optional<fs::path> static_dir)
    : impl_(std::make_unique<Impl>(store)) {
  auto& srv = impl_->server;
  auto& st = impl_->store;
  // SO_REUSEADDR only, so a port held by another listener fails to bind
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  auto reply = [](httplib::Response& res, int status, const std::string& body) {
    res.status = status;
    res.set_content(body, "application/json");
  };

  srv.Get("/items", [&st, reply](const httplib::Request& req, httplib::Response& res) {
    std::size_t offset = 0, limit = 50;
    try {
      if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
      if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
    } catch (const std::exception&) {
      return reply(res, 400, error_json("offset and limit must be non-negative integers").dump());
    }
    reply(res, 200, st.page_json(offset, std::min<std::size_t>(limit, 500)));
  });
  srv.Get(R"(/items/([^/]+))", [&st, reply](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!st.contains(id)) return reply(res, 404, error_json("unknown item " + id).dump());
    reply(res, 200, st.item_json(id));
  });
  srv.Post(R"(/items/([^/]+)/verdict)", [&st, reply](const httplib::Request& req, httplib::Response& res) {
    const auto r = st.submit_json(req.matches[1], req.body);
    reply(res, r.status, r.body);
  });

  if (static_dir) {
    if (!fs::is_directory(*static_dir)) throw ConfigError("static asset directory not found: " + static_dir->string());
    srv.set_mount_point("/", static_dir->string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholderPage, "text/html"); });
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0)
    bound = srv.bind_to_any_port(host);
  else if (!srv.bind_to_port(host, port))
    bound = -1;
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  impl_->bound = true;
  return bound;
}

void ReviewServer::listen() {
  if (!impl_->bound) throw Error("review server is not bound");
  impl_->server.listen_after_bind();
}

int ReviewServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace fspell
