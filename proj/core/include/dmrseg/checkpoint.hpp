// Copyright 2026 The dmrseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DMRSEG_CHECKPOINT_HPP
#define DMRSEG_CHECKPOINT_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmrseg/networks.hpp"

namespace dmrseg::ckpt {

// Binary layout, all integers little-endian:
//   "DMRSEGCK"            8 bytes
//   u32 format version
//   u32 header length, header text (key=value lines: ArchSpec + metadata)
//   u32 entry count, then per entry:
//     u8 kind (0 parameter, 1 buffer), u32 name length, name,
//     u32 ndim, ndim x u32 extents, numel x f32 payload
// Entry names are "<group>.<local name>"; the presence of "dmr_decoder."
// entries marks an attached checkpoint.
inline constexpr std::uint32_t kFormatVersion = 1;

struct CheckpointMeta {
  int epoch = -1;
  double val_dice = 0.0;
  std::string config_hash;
  bool operator==(const CheckpointMeta&) const = default;
};

/// Learned task log-scales saved alongside an attached model.
struct TaskScales {
  double s1 = 0.0;
  double s2 = 0.0;
};

template <typename T>
struct Checkpoint {
  nets::ModelParams<T> params;
  CheckpointMeta meta;
  std::optional<TaskScales> task;
};

std::string arch_to_text(const nets::ArchSpec& spec);
/// Parses the lines written by arch_to_text; unknown keys are ignored.
nets::ArchSpec arch_from_text(const std::string& text);

template <typename T>
std::vector<std::uint8_t> encode(const Checkpoint<T>& ck);
template <typename T>
Checkpoint<T> decode(std::span<const std::uint8_t> bytes);

template <typename T>
void save(const std::string& path, const Checkpoint<T>& ck);
template <typename T>
Checkpoint<T> load(const std::string& path);

/// Drops the regularizer decoder and task scales; a checkpoint without a
/// regularizer is returned unchanged.
template <typename T>
Checkpoint<T> finalize(const Checkpoint<T>& ck);

}  // namespace dmrseg::ckpt

#endif  // DMRSEG_CHECKPOINT_HPP
