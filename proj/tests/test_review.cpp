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

#include <fstream>

#include "fspell/io.hpp"
#include "fspell/review.hpp"
#include "test_util.hpp"

// after Eigen: resolv.h defines a _res macro
#include <httplib.h>
#include <json.hpp>

using namespace fspell;
using nlohmann::json;

namespace {

struct Fixture {
  test::TempDir dir;
  SynthCorpus synth;
  CorpusFiles corpus;
  std::vector<AnnotationRecord> candidates;

  explicit Fixture(int wanted = 10) {
    SynthConfig s;
    s.seed = 8;
    s.train_videos = 3;
    s.val_videos = 1;
    s.test_videos = 1;
    s.instances_per_video = 10;
    s.exemplars = 10;
    synth = generate_corpus(s);
    corpus = read_corpus(write_corpus(synth, dir.path / "corpus"));
    for (const auto& g : corpus.ground_truth) {
      if (static_cast<int>(candidates.size()) == wanted) break;
      AnnotationRecord r = g;
      r.source = LabelSource::pseudolabel;
      r.verified = false;
      r.full_word.reset();
      candidates.push_back(r);
    }
  }
};

std::size_t lines_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("review items carry context") {
  Fixture f(5);
  const ModelParams model = ModelParams::initialize(
      [&] {
        ModelConfig c;
        c.d_f = f.corpus.videos.front().dim();
        c.d = 16;
        c.n_layers = 1;
        c.n_heads = 2;
        c.ffn_dim = 16;
        c.max_T = 64;
        return c;
      }(),
      3);
  const auto items = build_review_items(f.candidates, f.corpus, &model);
  REQUIRE(items.size() == 5);
  for (const auto& it : items) {
    CHECK(it.window.start <= it.candidate.interval.midpoint());
    CHECK(it.window.end >= it.candidate.interval.midpoint());
    CHECK(!it.heatmap.empty());
    CHECK(it.timeline.size() == it.heatmap.size());
    CHECK(!it.subtitles.empty());
    CHECK(it.verdict.status == VerdictStatus::pending);
  }
  const auto plain = build_review_items(f.candidates, f.corpus, nullptr);
  CHECK(plain[0].timeline.empty());
  CHECK(plain[0].decoded == f.corpus.alphabet.render(*plain[0].candidate.word_label));
}

TEST_CASE("verdicts persist, audit every write and export accepted items only") {
  Fixture f(4);
  const auto review_dir = f.dir.path / "review";
  {
    ReviewStore store(review_dir, build_review_items(f.candidates, f.corpus, nullptr));
    CHECK(store.submit("item-0000", true, "ABC", "Abcd").ok);
    CHECK(store.submit("item-0001", false, "", "").ok);
    CHECK(store.submit("item-0002", true, "xy", "").ok);
    CHECK(store.submit("item-0002", true, "xyz", "xyzw").ok);  // overwrite

    CHECK(store.submit("item-9999", true, "a", "a").status == 404);
    CHECK(store.submit("item-0003", true, "", "").status == 400);
    CHECK(store.submit("item-0003", true, "a1", "").status == 400);
    CHECK(store.submit_json("item-0003", "{").status == 400);
    CHECK(store.submit_json("item-0003", R"({"accept": "yes"})").status == 400);
    CHECK(store.submit_json("item-0003", R"({"accept": true, "letters": 5})").status == 400);
    CHECK(store.verdict("item-0003").status == VerdictStatus::pending);

    const Verdict v = store.verdict("item-0002");
    CHECK(v.letters == "xyz");
    CHECK(v.full_word == "xyzw");
    CHECK(v.revision == 2);
    CHECK(store.verdict("item-0000").letters == "abc");
    CHECK(store.verdict("item-0000").full_word == "abcd");
  }
  CHECK(lines_in(review_dir / "audit.jsonl") == 4);

  ReviewStore reopened(review_dir, build_review_items(f.candidates, f.corpus, nullptr));
  CHECK(reopened.verdict("item-0002").revision == 2);
  CHECK(reopened.verdict("item-0001").status == VerdictStatus::rejected);

  const auto out = f.dir.path / "testset.jsonl";
  CHECK(reopened.export_testset(out) == 2);
  const auto records = read_annotations(out);
  REQUIRE(records.size() == 2);
  for (const auto& r : records) {
    CHECK(r.source == LabelSource::manual);
    CHECK(r.verified);
  }
  CHECK(lines_in(review_dir / "verified.jsonl") == 2);
}

TEST_CASE("http round trip over 50 candidates") {
  Fixture f(50);
  REQUIRE(f.candidates.size() == 50);
  const auto review_dir = f.dir.path / "review";
  const auto static_dir = f.dir.path / "static";
  std::filesystem::create_directories(static_dir);
  std::ofstream(static_dir / "index.html") << "<html>review</html>";

  ReviewStore store(review_dir, build_review_items(f.candidates, f.corpus, nullptr));
  ReviewServer server(store, static_dir);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto index = cli.Get("/index.html");
  REQUIRE(index);
  CHECK(index->status == 200);
  CHECK(index->body.find("review") != std::string::npos);

  // page through every item
  std::vector<std::string> ids;
  for (int offset = 0; offset < 50; offset += 20) {
    auto res = cli.Get("/items?offset=" + std::to_string(offset) + "&limit=20");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const json page = json::parse(res->body);
    CHECK(page["total"] == 50);
    for (const auto& it : page["items"]) ids.push_back(it["id"]);
  }
  REQUIRE(ids.size() == 50);

  auto one = cli.Get("/items/" + ids[3]);
  REQUIRE(one);
  CHECK(one->status == 200);
  CHECK(json::parse(one->body)["verdict"]["status"] == "pending");

  CHECK(cli.Get("/items/nope")->status == 404);
  CHECK(cli.Get("/items?offset=x")->status == 400);
  CHECK(cli.Post("/items/nope/verdict", R"({"accept": true, "letters": "a"})", "application/json")->status == 404);
  CHECK(cli.Post("/items/" + ids[0] + "/verdict", "not json", "application/json")->status == 400);

  // accept even positions with the true letters, reject odd ones
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& gt = f.corpus.ground_truth[i];
    json body = {{"accept", i % 2 == 0},
                 {"letters", i % 2 == 0 ? f.corpus.alphabet.render(*gt.word_label) : ""},
                 {"full_word", *gt.full_word}};
    auto res = cli.Post("/items/" + ids[i] + "/verdict", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
  }
  server.stop();

  const auto out = f.dir.path / "exported.jsonl";
  CHECK(store.export_testset(out) == 25);
  const auto exported = read_annotations(out);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < 50; i += 2)
    for (const auto& r : exported) matches += r.interval == f.corpus.ground_truth[i].interval &&
                                              r.word_label == f.corpus.ground_truth[i].word_label &&
                                              r.full_word == f.corpus.ground_truth[i].full_word;
  CHECK(matches == 25);
  CHECK(lines_in(review_dir / "audit.jsonl") == 50);
}

TEST_CASE("server without static assets serves a placeholder and refuses a taken port") {
  Fixture f(1);
  ReviewStore store(f.dir.path / "review", build_review_items(f.candidates, f.corpus, nullptr));
  ReviewServer a(store);
  const int port = a.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Get("/");
  REQUIRE(res);
  CHECK(res->body.find("/items") != std::string::npos);

  ReviewServer b(store);
  CHECK_THROWS_AS(b.bind("127.0.0.1", port), Error);
  CHECK_THROWS_AS(ReviewServer(store, f.dir.path / "missing"), ConfigError);
}
