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
#include <optional>
#include <string>

#include "fspell/model.hpp"

namespace fspell {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Lineage metadata stored next to the weights.
struct CheckpointMeta {
  std::string stage;                        // e.g. "stage1.ctc"
  std::optional<std::string> parent_digest;  // digest of the checkpoint training started from
  std::string note;
};

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
  std::string digest;  // hex FNV-1a of the serialized body; filled on load/save
};

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Layout: "FSCK" | u32 version | config | u32 len + meta JSON | u64 n | n x f64 | u64 checksum.
std::string encode_checkpoint(const ModelParams& params, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(const std::string& bytes);

// Returns the digest of what was written.
std::string save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fspell
