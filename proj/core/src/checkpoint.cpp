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

#include "fspell/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "fspell/io.hpp"

namespace fspell {

namespace {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("checkpoint truncated");
  char buf[sizeof(T)];
  std::memcpy(buf, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

std::string encode_checkpoint(const ModelParams& params, const CheckpointMeta& meta) {
  const auto& c = params.config();
  std::string out = "FSCK";
  put<std::uint32_t>(out, kCheckpointVersion);
  for (int v : {c.d_f, c.d, c.n_layers, c.n_heads, c.ffn_dim, c.max_T, c.c_sym}) put<std::int32_t>(out, v);
  put<double>(out, c.dropout);
  nlohmann::json m = {{"stage", meta.stage},
                      {"parent_digest", meta.parent_digest ? nlohmann::json(*meta.parent_digest) : nlohmann::json()},
                      {"note", meta.note}};
  const std::string ms = m.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ms.size()));
  out += ms;
  put<std::uint64_t>(out, params.values().size());
  for (double v : params.values()) put<double>(out, v);
  put<std::uint64_t>(out, fnv1a64(out.data(), out.size()));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "FSCK") != 0) throw FormatError("missing FSCK magic");
  if (bytes.size() < 12) throw FormatError("checkpoint truncated");
  const std::size_t body = bytes.size() - 8;
  std::size_t tail = body;
  const auto stored = get<std::uint64_t>(bytes, tail);
  if (stored != fnv1a64(bytes.data(), body)) throw FormatError("checkpoint checksum mismatch");

  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  ModelConfig c;
  c.d_f = get<std::int32_t>(bytes, pos);
  c.d = get<std::int32_t>(bytes, pos);
  c.n_layers = get<std::int32_t>(bytes, pos);
  c.n_heads = get<std::int32_t>(bytes, pos);
  c.ffn_dim = get<std::int32_t>(bytes, pos);
  c.max_T = get<std::int32_t>(bytes, pos);
  c.c_sym = get<std::int32_t>(bytes, pos);
  c.dropout = get<double>(bytes, pos);
  const auto meta_len = get<std::uint32_t>(bytes, pos);
  if (pos + meta_len > body) throw FormatError("checkpoint metadata truncated");
  auto m = nlohmann::json::parse(bytes.substr(pos, meta_len));
  pos += meta_len;

  Checkpoint ck{ModelParams(c), {}, hex64(stored)};
  ck.meta.stage = m.at("stage").get<std::string>();
  if (!m.at("parent_digest").is_null()) ck.meta.parent_digest = m.at("parent_digest").get<std::string>();
  ck.meta.note = m.value("note", "");
  const auto count = get<std::uint64_t>(bytes, pos);
  if (count != ck.params.values().size()) throw FormatError("checkpoint parameter count does not match its config");
  for (auto& v : ck.params.values()) v = get<double>(bytes, pos);
  if (pos != body) throw FormatError("trailing bytes in checkpoint");
  if (!ck.params.all_finite()) throw FormatError("checkpoint contains non-finite parameters");
  return ck;
}

std::string save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const CheckpointMeta& meta) {
  std::string bytes = encode_checkpoint(params, meta);
  std::size_t tail = bytes.size() - 8;
  const std::string digest = hex64(get<std::uint64_t>(bytes, tail));
  write_file_atomic(path, bytes);
  return digest;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_text_file(path)); }

}  // namespace fspell
