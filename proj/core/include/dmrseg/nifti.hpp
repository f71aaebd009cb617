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

#ifndef DMRSEG_NIFTI_HPP
#define DMRSEG_NIFTI_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmrseg/volume.hpp"

namespace dmrseg::io {

// Single-file NIfTI-1 ("n+1") subset: uint8, int16 or float32 payloads, at
// most three spatial axes (a fourth axis is accepted only with extent 1),
// either byte order. Writing always emits little-endian float32 with a
// 348-byte header, a zero extension block and the payload at byte 352.
inline constexpr int kDtUint8 = 2;
inline constexpr int kDtInt16 = 4;
inline constexpr int kDtFloat32 = 16;
inline constexpr int kHeaderSize = 348;
inline constexpr int kVoxOffset = 352;

Volume decode_nifti(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_nifti(const Volume& vol);

Volume read_nifti(const std::string& path);
/// Reads a label map. Voxel values must be non-negative integers below
/// `num_classes`.
LabelVolume read_nifti_labels(const std::string& path, int num_classes);

void write_nifti(const Volume& vol, const std::string& path);
void write_nifti(const LabelVolume& labels, const std::string& path);

Volume to_volume(const LabelVolume& labels);
LabelVolume to_labels(const Volume& vol, int num_classes);

}  // namespace dmrseg::io

#endif  // DMRSEG_NIFTI_HPP
