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

#include "fspell/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <map>
#include <set>

#include <json.hpp>

#include "fspell/io.hpp"
#include "fspell/random.hpp"

namespace fspell {

using nlohmann::json;

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("synth config: " + what);
  };
  Alphabet check(alphabet);
  require(d_f >= 1, "d_f must be >= 1");
  require(distractors >= 1, "distractors must be >= 1");
  require(family_weight >= 0.0 && family_weight < 1.0, "family_weight must be in [0, 1)");
  require(fps > 0.0 && stride >= 1, "fps and stride must be positive");
  require(letter_steps_min >= 1 && letter_steps_max >= letter_steps_min, "letter durations must be >= 1");
  require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  require(gap_min_seconds > 0.0 && gap_max_seconds >= gap_min_seconds, "bad gap range");
  require(proper_nouns >= 2 && nouns >= 2 && other_words >= 1, "lexicon too small");
  require(word_len_min >= 2 && word_len_max >= word_len_min, "word lengths must be >= 2");
  require(train_videos >= 1 && val_videos >= 0 && test_videos >= 0, "bad video counts");
  require(instances_per_video >= 1, "instances_per_video must be >= 1");
  require(distractor_nouns >= 0 && other_tokens >= 0, "token counts must be >= 0");
  for (double r : {proper_noun_fraction, missing_rate, mouth_rate, corruption_rate, spurious_spot_rate})
    require(r >= 0.0 && r <= 1.0, "rates must lie in [0, 1]");
  require(exemplars >= 1 && exemplar_sigma >= 0.0, "bad exemplar settings");
}

LabelSequence drop_letters(const LabelSequence& word, double rate, std::mt19937_64& rng) {
  const std::size_t n = word.size();
  if (n < 2 || rate <= 0.0) return word;
  const double q = std::min(1.0, rate * static_cast<double>(n) / static_cast<double>(n - 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabelSequence out;
  out.indices.push_back(word[0]);
  for (std::size_t i = 1; i < n; ++i)
    if (u(rng) >= q) out.indices.push_back(word[i]);
  return out;
}

namespace {

// Rows are unit vectors; the first min(rows, dim) are mutually orthogonal.
Matrix random_directions(int rows, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, dim);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = n(rng);
    if (i < dim)
      for (int k = 0; k < i; ++k) m.row(i) -= m.row(i).dot(m.row(k)) * m.row(k);
    m.row(i).normalize();
  }
  return m;
}

std::string random_word(int len, const std::string& symbols, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, symbols.size() - 1);
  std::string w;
  for (int i = 0; i < len; ++i) w.push_back(symbols[pick(rng)]);
  return w;
}

std::string display_form(const std::string& word, PosTag pos) {
  std::string out = word;
  if (pos == PosTag::propn && !out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string video_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "vid%03d", index);
  return buf;
}

struct Prototypes {
  Matrix letters;
  Matrix distractors;
};

Prototypes make_prototypes(const SynthConfig& c, int n_letters, std::mt19937_64& rng) {
  const Matrix dirs = random_directions(2 + n_letters + c.distractors, c.d_f, rng);
  const double own = std::sqrt(1.0 - c.family_weight * c.family_weight);
  Prototypes p{Matrix(n_letters, c.d_f), Matrix(c.distractors, c.d_f)};
  for (int l = 0; l < n_letters; ++l)
    p.letters.row(l) = (c.family_weight * dirs.row(0) + own * dirs.row(2 + l)).normalized();
  for (int k = 0; k < c.distractors; ++k)
    p.distractors.row(k) = (c.family_weight * dirs.row(1) + own * dirs.row(2 + n_letters + k)).normalized();
  return p;
}

struct Lexicon {
  std::vector<std::string> propn, noun, other;
};

Lexicon make_lexicon(const SynthConfig& c, std::mt19937_64& rng) {
  std::set<std::string> used;
  std::uniform_int_distribution<int> len(c.word_len_min, c.word_len_max);
  auto fill = [&](std::vector<std::string>& out, int count) {
    int attempts = 0;
    while (static_cast<int>(out.size()) < count) {
      if (++attempts > count * 1000) throw ConfigError("synth config: cannot draw enough distinct words");
      std::string w = random_word(len(rng), c.alphabet, rng);
      if (used.insert(w).second) out.push_back(std::move(w));
    }
  };
  Lexicon lex;
  fill(lex.propn, c.proper_nouns);
  fill(lex.noun, c.nouns);
  fill(lex.other, c.other_words);
  return lex;
}

class VideoBuilder {
 public:
  VideoBuilder(const SynthConfig& c, const Prototypes& p, std::mt19937_64& rng) : c_(c), p_(p), rng_(rng) {}

  void frame(const Eigen::RowVectorXd& proto, int label) {
    Eigen::RowVectorXd row = proto;
    for (int j = 0; j < row.size(); ++j) row(j) += noise_(rng_) * c_.noise_sigma;
    rows_.push_back(row);
    labels_.push_back(label);
  }

  void gap(double seconds) {
    const double step = c_.stride / c_.fps;
    int remaining = std::max(1, static_cast<int>(std::lround(seconds / step)));
    std::uniform_int_distribution<int> proto(0, c_.distractors - 1), chunk(3, 8);
    while (remaining > 0) {
      const int k = proto(rng_);
      const int n = std::min(remaining, chunk(rng_));
      for (int i = 0; i < n; ++i) frame(p_.distractors.row(k), -1);
      remaining -= n;
    }
  }

  StepRange word(const LabelSequence& letters) {
    std::uniform_int_distribution<int> dur(c_.letter_steps_min, c_.letter_steps_max);
    const int begin = steps();
    for (std::size_t i = 0; i < letters.size(); ++i) {
      if (i > 0 && letters[i] == letters[i - 1]) frame(Eigen::RowVectorXd::Zero(c_.d_f), -2);
      const int n = dur(rng_);
      for (int k = 0; k < n; ++k) frame(p_.letters.row(letters[i]), letters[i]);
    }
    return {begin, steps()};
  }

  int steps() const { return static_cast<int>(rows_.size()); }

  FeatureSequence finish(const std::string& id, std::vector<int>& labels) const {
    FeatureSequence seq;
    seq.data.resize(steps(), c_.d_f);
    for (int t = 0; t < steps(); ++t) seq.data.row(t) = rows_[static_cast<std::size_t>(t)].cast<float>();
    seq.fps = c_.fps;
    seq.stride = c_.stride;
    seq.video_id = id;
    labels = labels_;
    return seq;
  }

 private:
  const SynthConfig& c_;
  const Prototypes& p_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::vector<Eigen::RowVectorXd> rows_;
  std::vector<int> labels_;
};

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& config) {
  config.validate();
  SynthCorpus out;
  out.config = config;
  out.alphabet = Alphabet(config.alphabet);
  const Alphabet& alphabet = out.alphabet;

  std::mt19937_64 proto_rng(derive_seed(config.seed, "prototypes"));
  const Prototypes protos = make_prototypes(config, alphabet.size(), proto_rng);
  out.letter_prototypes = protos.letters;

  std::mt19937_64 lex_rng(derive_seed(config.seed, "lexicon"));
  const Lexicon lex = make_lexicon(config, lex_rng);

  const int n_videos = config.train_videos + config.val_videos + config.test_videos;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int v = 0; v < n_videos; ++v) {
    const std::string id = video_name(v);
    out.split.push_back(v < config.train_videos                       ? "train"
                        : v < config.train_videos + config.val_videos ? "val"
                                                                      : "test");
    std::mt19937_64 rng(derive_seed(config.seed, "video:" + id));
    std::uniform_real_distribution<double> gap_len(config.gap_min_seconds, config.gap_max_seconds);
    std::uniform_real_distribution<double> pad(0.3, 1.2);
    std::uniform_int_distribution<std::size_t> pick_propn(0, lex.propn.size() - 1), pick_noun(0, lex.noun.size() - 1),
        pick_other(0, lex.other.size() - 1);

    VideoBuilder builder(config, protos, rng);
    struct Placed {
      StepRange steps;
      std::string word;
      PosTag pos;
      LabelSequence signed_letters;
    };
    std::vector<Placed> placed;
    std::vector<std::pair<int, int>> gaps;  // step ranges of background, for filler subtitles

    for (int i = 0; i < config.instances_per_video; ++i) {
      const int g0 = builder.steps();
      builder.gap(gap_len(rng));
      gaps.emplace_back(g0, builder.steps());
      const bool proper = unit(rng) < config.proper_noun_fraction;
      const std::string word = proper ? lex.propn[pick_propn(rng)] : lex.noun[pick_noun(rng)];
      const LabelSequence signed_letters = drop_letters(encode_word(word, alphabet), config.missing_rate, rng);
      placed.push_back({builder.word(signed_letters), word, proper ? PosTag::propn : PosTag::noun, signed_letters});
    }
    const int g0 = builder.steps();
    builder.gap(gap_len(rng));
    gaps.emplace_back(g0, builder.steps());

    std::vector<int> labels;
    out.videos.push_back(builder.finish(id, labels));
    out.frame_labels.push_back(std::move(labels));
    const FeatureSequence& seq = out.videos.back();

    auto noun_tokens = [&](int count, const std::string& exclude) {
      std::vector<Token> toks;
      while (static_cast<int>(toks.size()) < count) {
        const bool proper = unit(rng) < 0.5;
        const std::string& w = proper ? lex.propn[pick_propn(rng)] : lex.noun[pick_noun(rng)];
        if (w == exclude) continue;
        toks.push_back({display_form(w, proper ? PosTag::propn : PosTag::noun), proper ? PosTag::propn : PosTag::noun});
      }
      return toks;
    };
    auto finish_subtitle = [&](double start, double end, std::vector<Token> toks) {
      for (int k = 0; k < config.other_tokens; ++k) toks.push_back({lex.other[pick_other(rng)], PosTag::other});
      std::shuffle(toks.begin(), toks.end(), rng);
      SubtitleRecord s{id, start, end, "", std::move(toks)};
      for (const auto& t : s.tokens) s.text += (s.text.empty() ? "" : " ") + t.word;
      out.subtitles.push_back(std::move(s));
    };

    for (std::size_t i = 0; i < placed.size(); ++i) {
      // Filler subtitle in the middle of the preceding background stretch.
      const auto [gb, ge] = gaps[i];
      const double gmid = seq.time_of_step((gb + ge) / 2);
      finish_subtitle(gmid - 0.75, gmid + 0.75, noun_tokens(config.distractor_nouns, ""));

      const auto& p = placed[i];
      const Interval iv = seq.interval_of(p.steps);
      std::vector<Token> toks = noun_tokens(config.distractor_nouns, p.word);
      toks.push_back({display_form(p.word, p.pos), p.pos});
      const double sub_start = iv.start - pad(rng), sub_end = iv.end + pad(rng);
      finish_subtitle(sub_start, sub_end, toks);

      if (unit(rng) < config.mouth_rate) {
        std::normal_distribution<double> jitter(0.0, 0.15 * iv.duration());
        MouthingSpot spot{id, p.word, std::clamp(iv.midpoint() + jitter(rng), iv.start, iv.end),
                          0.3 + 0.7 * unit(rng)};
        if (unit(rng) < config.corruption_rate) {
          std::vector<std::string> others;
          for (const auto& t : toks)
            if (t.pos != PosTag::other && normalize_word(t.word, alphabet) != p.word)
              others.push_back(normalize_word(t.word, alphabet));
          if (!others.empty()) spot.word = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
        }
        out.spots.push_back(spot);
      }
      if (unit(rng) < config.spurious_spot_rate) {
        const auto& t = toks[std::uniform_int_distribution<std::size_t>(0, toks.size() - 1)(rng)];
        out.spots.push_back({id, normalize_word(t.word, alphabet), sub_start + (sub_end - sub_start) * unit(rng),
                             0.1 * unit(rng)});
      }

      AnnotationRecord gt;
      gt.video_id = id;
      gt.interval = iv;
      gt.word_label = p.signed_letters;
      gt.full_word = p.word;
      gt.source = LabelSource::manual;
      gt.verified = true;
      out.ground_truth.push_back(std::move(gt));
    }
  }

  std::mt19937_64 ex_rng(derive_seed(config.seed, "exemplars"));
  std::uniform_int_distribution<int> letter(0, alphabet.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  out.exemplars.features.resize(config.exemplars, config.d_f);
  for (int e = 0; e < config.exemplars; ++e) {
    Eigen::RowVectorXd row = protos.letters.row(letter(ex_rng));
    for (int j = 0; j < config.d_f; ++j) row(j) += config.exemplar_sigma * noise(ex_rng);
    out.exemplars.features.row(e) = row.cast<float>();
  }

  std::map<std::string, std::size_t> freq;
  for (std::size_t v = 0; v < out.videos.size(); ++v) {
    if (out.split[v] != "train") continue;
    for (const auto& s : out.subtitles)
      if (s.video_id == out.videos[v].video_id)
        for (const auto& t : s.tokens) ++freq[normalize_word(t.word, alphabet)];
  }
  auto add_entries = [&](const std::vector<std::string>& words, PosTag pos) {
    for (const auto& w : words) out.lexicon.push_back({w, pos, freq.count(w) ? freq.at(w) : 0});
  };
  add_entries(lex.propn, PosTag::propn);
  add_entries(lex.noun, PosTag::noun);
  add_entries(lex.other, PosTag::other);
  return out;
}

namespace {

#define FSPELL_SYNTH_FIELDS(X)                                                                                     \
  X(seed) X(alphabet) X(d_f) X(distractors) X(family_weight) X(fps) X(stride) X(letter_steps_min)                  \
  X(letter_steps_max) X(noise_sigma) X(gap_min_seconds) X(gap_max_seconds) X(proper_nouns) X(nouns) X(other_words) \
  X(word_len_min) X(word_len_max) X(train_videos) X(val_videos) X(test_videos) X(instances_per_video)              \
  X(distractor_nouns) X(other_tokens) X(proper_noun_fraction) X(missing_rate) X(mouth_rate) X(corruption_rate)    \
  X(spurious_spot_rate) X(exemplars) X(exemplar_sigma)

json synth_json(const SynthConfig& c) {
  json j;
#define X(f) j[#f] = c.f;
  FSPELL_SYNTH_FIELDS(X)
#undef X
  return j;
}

SynthConfig synth_from(const json& j) {
  if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
  SynthConfig c;
  std::set<std::string> known;
#define X(f)                                                                   \
  known.insert(#f);                                                            \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
  FSPELL_SYNTH_FIELDS(X)
#undef X
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown synth config key: " + k);
  return c;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_file_atomic(path, text);
}

}  // namespace

std::string synth_config_to_json(const SynthConfig& config) { return synth_json(config).dump(2); }

SynthConfig synth_config_from_json(const std::string& text) {
  try {
    return synth_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
}

std::string to_json_line(const LexiconEntry& e) {
  return json{{"word", e.word}, {"pos", std::string(to_string(e.pos))}, {"frequency", e.frequency}}.dump();
}

LexiconEntry lexicon_entry_from_json_line(const std::string& line) {
  try {
    const auto j = json::parse(line);
    return {j.at("word").get<std::string>(), pos_tag_from_string(j.at("pos").get<std::string>()),
            j.at("frequency").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad lexicon line: ") + e.what());
  }
}

std::filesystem::path write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  json videos = json::array();
  for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
    const auto& seq = corpus.videos[v];
    const std::string rel = "features/" + seq.video_id + ".fseq";
    write_feature_file(seq, dir / rel);
    videos.push_back({{"video_id", seq.video_id}, {"split", corpus.split[v]}, {"path", rel}, {"steps", seq.steps()}});
  }
  FeatureSequence bank;
  bank.data = corpus.exemplars.features;
  bank.fps = corpus.config.fps;
  bank.stride = corpus.config.stride;
  write_feature_file(bank, dir / "exemplars.fseq");

  write_subtitles(corpus.subtitles, dir / "subtitles.jsonl");
  write_mouthings(corpus.spots, dir / "mouthings.jsonl");
  write_annotations(corpus.ground_truth, dir / "ground_truth.jsonl", corpus.alphabet);
  std::vector<std::string> lex;
  for (const auto& e : corpus.lexicon) lex.push_back(to_json_line(e));
  write_lines(dir / "lexicon.jsonl", lex);

  const json manifest = {{"format", "fspell-corpus"},
                         {"version", 1},
                         {"alphabet", corpus.alphabet.symbols()},
                         {"generator", synth_json(corpus.config)},
                         {"videos", videos},
                         {"files",
                          {{"exemplars", "exemplars.fseq"},
                           {"subtitles", "subtitles.jsonl"},
                           {"mouthings", "mouthings.jsonl"},
                           {"ground_truth", "ground_truth.jsonl"},
                           {"lexicon", "lexicon.jsonl"}}}};
  const fs::path path = dir / "manifest.json";
  write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

const FeatureSequence& CorpusFiles::video(const std::string& id) const {
  for (const auto& v : videos)
    if (v.video_id == id) return v;
  throw FormatError("no features for video " + id);
}

std::vector<std::string> CorpusFiles::video_ids(const std::string& which) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < videos.size(); ++i)
    if (split[i] == which) out.push_back(videos[i].video_id);
  return out;
}

CorpusFiles read_corpus(const std::filesystem::path& manifest_path) {
  const auto dir = manifest_path.parent_path();
  json m;
  try {
    m = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  try {
    CorpusFiles c;
    c.alphabet = Alphabet(m.at("alphabet").get<std::string>());
    for (const auto& v : m.at("videos")) {
      FeatureSequence seq = read_feature_file(dir / v.at("path").get<std::string>());
      seq.video_id = v.at("video_id").get<std::string>();
      c.videos.push_back(std::move(seq));
      c.split.push_back(v.at("split").get<std::string>());
    }
    const auto& f = m.at("files");
    c.exemplars.features = read_feature_file(dir / f.at("exemplars").get<std::string>()).data;
    c.subtitles = read_subtitles(dir / f.at("subtitles").get<std::string>());
    c.spots = read_mouthings(dir / f.at("mouthings").get<std::string>());
    c.ground_truth = read_annotations(dir / f.at("ground_truth").get<std::string>(), c.alphabet);
    std::istringstream lex(read_text_file(dir / f.at("lexicon").get<std::string>()));
    for (std::string line; std::getline(lex, line);)
      if (!line.empty()) c.lexicon.push_back(lexicon_entry_from_json_line(line));
    return c;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace fspell
