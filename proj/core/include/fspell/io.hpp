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
#include <string>
#include <vector>

#include "fspell/types.hpp"

namespace fspell {

// Binary feature file, little-endian:
//   "FSEQ" | u32 version=1 | u32 T | u32 d_f | f32 fps | u32 stride | T*d_f f32 row-major
inline constexpr std::uint32_t kFeatureFileVersion = 1;

FeatureSequence read_feature_file(const std::filesystem::path& path);
void write_feature_file(const FeatureSequence& seq, const std::filesystem::path& path);

// In-memory variants used by the file functions and by tests.
FeatureSequence decode_feature_bytes(const std::string& bytes);
std::string encode_feature_bytes(const FeatureSequence& seq);

// Line-delimited JSON records. Word labels are stored as rendered text, so
// annotation I/O needs the alphabet.
std::string to_json_line(const SubtitleRecord& r);
std::string to_json_line(const MouthingSpot& r);
std::string to_json_line(const AnnotationRecord& r, const Alphabet& alphabet = Alphabet());

SubtitleRecord subtitle_from_json_line(const std::string& line);
MouthingSpot mouthing_from_json_line(const std::string& line);
AnnotationRecord annotation_from_json_line(const std::string& line, const Alphabet& alphabet = Alphabet());

std::vector<SubtitleRecord> read_subtitles(const std::filesystem::path& path);
std::vector<MouthingSpot> read_mouthings(const std::filesystem::path& path);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path,
                                               const Alphabet& alphabet = Alphabet());

void write_subtitles(const std::vector<SubtitleRecord>& records, const std::filesystem::path& path);
void write_mouthings(const std::vector<MouthingSpot>& records, const std::filesystem::path& path);
// Sorts a copy by (video_id, start_time) before writing.
void write_annotations(std::vector<AnnotationRecord> records, const std::filesystem::path& path,
                       const Alphabet& alphabet = Alphabet());

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace fspell
