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

#include "fspell/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fspell {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  static_assert(sizeof(T) == 4);
  if (pos + 4 > in.size()) throw FormatError("feature file truncated");
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      f(line);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

template <typename R, typename F>
void write_lines(const std::vector<R>& records, const std::filesystem::path& path, F&& to_line) {
  std::string out;
  for (const auto& r : records) {
    out += to_line(r);
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

json optional_or_null(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string encode_feature_bytes(const FeatureSequence& seq) {
  seq.validate();
  std::string out;
  out.reserve(24 + static_cast<std::size_t>(seq.data.size()) * 4);
  out += "FSEQ";
  put_le<std::uint32_t>(out, kFeatureFileVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.steps()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.dim()));
  put_le<float>(out, static_cast<float>(seq.fps));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.stride));
  for (Eigen::Index t = 0; t < seq.data.rows(); ++t)
    for (Eigen::Index j = 0; j < seq.data.cols(); ++j) put_le<float>(out, seq.data(t, j));
  return out;
}

FeatureSequence decode_feature_bytes(const std::string& bytes) {
  if (bytes.size() < 24 || bytes.compare(0, 4, "FSEQ") != 0) throw FormatError("missing FSEQ magic");
  std::size_t pos = 4;
  auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kFeatureFileVersion) throw FormatError("unsupported feature file version " + std::to_string(version));
  auto steps = get_le<std::uint32_t>(bytes, pos);
  auto dim = get_le<std::uint32_t>(bytes, pos);
  auto fps = get_le<float>(bytes, pos);
  auto stride = get_le<std::uint32_t>(bytes, pos);
  if (steps == 0) throw FormatError("feature file header has T = 0");
  if (dim == 0) throw FormatError("feature file header has d_f = 0");
  const std::uint64_t payload = static_cast<std::uint64_t>(steps) * dim * 4;
  if (bytes.size() - pos != payload)
    throw FormatError("feature payload size mismatch: expected " + std::to_string(payload) + " bytes, got " +
                      std::to_string(bytes.size() - pos));
  FeatureSequence seq;
  seq.fps = fps;
  seq.stride = static_cast<int>(stride);
  seq.data.resize(steps, dim);
  for (std::uint32_t t = 0; t < steps; ++t)
    for (std::uint32_t j = 0; j < dim; ++j) seq.data(t, j) = get_le<float>(bytes, pos);
  seq.validate();
  return seq;
}

FeatureSequence read_feature_file(const std::filesystem::path& path) {
  auto seq = decode_feature_bytes(read_text_file(path));
  seq.video_id = path.stem().string();
  return seq;
}

void write_feature_file(const FeatureSequence& seq, const std::filesystem::path& path) {
  write_file_atomic(path, encode_feature_bytes(seq));
}

std::string to_json_line(const SubtitleRecord& r) {
  json tokens = json::array();
  for (const auto& t : r.tokens) tokens.push_back(json::array({t.word, std::string(to_string(t.pos))}));
  json j = {{"video_id", r.video_id}, {"start_time", r.start_time}, {"end_time", r.end_time},
            {"text", r.text}, {"tokens", tokens}};
  return j.dump();
}

std::string to_json_line(const MouthingSpot& r) {
  json j = {{"video_id", r.video_id}, {"word", r.word}, {"time", r.time}, {"confidence", r.confidence}};
  return j.dump();
}

std::string to_json_line(const AnnotationRecord& r, const Alphabet& alphabet) {
  json j = {{"video_id", r.video_id},
            {"interval", json::array({r.interval.start, r.interval.end})},
            {"word_label", r.word_label ? json(alphabet.render(*r.word_label)) : json(nullptr)},
            {"full_word", optional_or_null(r.full_word)},
            {"source", std::string(to_string(r.source))},
            {"confidence", r.confidence ? json(*r.confidence) : json(nullptr)},
            {"verified", r.verified}};
  return j.dump();
}

SubtitleRecord subtitle_from_json_line(const std::string& line) {
  auto j = json::parse(line);
  SubtitleRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.start_time = j.at("start_time").get<double>();
  r.end_time = j.at("end_time").get<double>();
  r.text = j.at("text").get<std::string>();
  for (const auto& t : j.at("tokens")) r.tokens.push_back({t.at(0).get<std::string>(), pos_tag_from_string(t.at(1).get<std::string>())});
  if (!(r.start_time < r.end_time)) throw FormatError("subtitle with start_time >= end_time in " + r.video_id);
  return r;
}

MouthingSpot mouthing_from_json_line(const std::string& line) {
  auto j = json::parse(line);
  MouthingSpot r;
  r.video_id = j.at("video_id").get<std::string>();
  r.word = j.at("word").get<std::string>();
  r.time = j.at("time").get<double>();
  r.confidence = j.at("confidence").get<double>();
  if (r.confidence < 0.0 || r.confidence > 1.0) throw FormatError("mouthing confidence outside [0,1]");
  return r;
}

AnnotationRecord annotation_from_json_line(const std::string& line, const Alphabet& alphabet) {
  auto j = json::parse(line);
  AnnotationRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  const auto& iv = j.at("interval");
  r.interval = {iv.at(0).get<double>(), iv.at(1).get<double>()};
  if (!j.at("word_label").is_null()) r.word_label = encode_word(j.at("word_label").get<std::string>(), alphabet);
  if (!j.at("full_word").is_null()) r.full_word = j.at("full_word").get<std::string>();
  r.source = label_source_from_string(j.at("source").get<std::string>());
  if (!j.at("confidence").is_null()) r.confidence = j.at("confidence").get<double>();
  r.verified = j.at("verified").get<bool>();
  r.validate();
  return r;
}

std::vector<SubtitleRecord> read_subtitles(const std::filesystem::path& path) {
  std::vector<SubtitleRecord> out;
  for_each_line(path, [&](const std::string& l) { out.push_back(subtitle_from_json_line(l)); });
  return out;
}

std::vector<MouthingSpot> read_mouthings(const std::filesystem::path& path) {
  std::vector<MouthingSpot> out;
  for_each_line(path, [&](const std::string& l) { out.push_back(mouthing_from_json_line(l)); });
  return out;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path, const Alphabet& alphabet) {
  std::vector<AnnotationRecord> out;
  for_each_line(path, [&](const std::string& l) { out.push_back(annotation_from_json_line(l, alphabet)); });
  return out;
}

void write_subtitles(const std::vector<SubtitleRecord>& records, const std::filesystem::path& path) {
  write_lines(records, path, [](const SubtitleRecord& r) { return to_json_line(r); });
}

void write_mouthings(const std::vector<MouthingSpot>& records, const std::filesystem::path& path) {
  write_lines(records, path, [](const MouthingSpot& r) { return to_json_line(r); });
}

void write_annotations(std::vector<AnnotationRecord> records, const std::filesystem::path& path,
                       const Alphabet& alphabet) {
  sort_annotations(records);
  write_lines(records, path, [&](const AnnotationRecord& r) { return to_json_line(r, alphabet); });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fspell
