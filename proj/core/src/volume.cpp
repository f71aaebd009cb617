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

#include "dmrseg/volume.hpp"

#include <algorithm>
#include <string>

#include "dmrseg/error.hpp"

namespace dmrseg {
namespace {

void check_dims(const std::array<int, 3>& d, const Vec3& sp) {
  for (int e : d)
    if (e <= 0) throw DimensionError("volume extents must be positive");
  for (double s : sp)
    if (!(s > 0)) throw SpecError("voxel spacing must be positive");
}

}  // namespace

Volume::Volume(std::array<int, 3> d, Vec3 sp) : dims(d), spacing(sp) {
  check_dims(d, sp);
  voxels.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0.0);
}

ImageSlice Volume::slice(int z) const {
  if (z < 0 || z >= nz()) throw DimensionError("slice index " + std::to_string(z) + " out of range");
  ImageSlice s(ny(), nx());
  std::copy_n(voxels.begin() + static_cast<std::ptrdiff_t>(index(0, 0, z)), s.size(),
              s.values.begin());
  return s;
}

void Volume::set_slice(int z, const ImageSlice& s) {
  if (z < 0 || z >= nz() || s.height != ny() || s.width != nx()) {
    throw DimensionError("set_slice: slice does not fit the volume");
  }
  std::copy(s.values.begin(), s.values.end(),
            voxels.begin() + static_cast<std::ptrdiff_t>(index(0, 0, z)));
}

LabelVolume::LabelVolume(std::array<int, 3> d, Vec3 sp, int classes)
    : dims(d), spacing(sp), num_classes(classes) {
  check_dims(d, sp);
  if (classes < 2) throw SpecError("label volume needs at least two classes");
  labels.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0);
}

LabelSlice LabelVolume::slice(int z) const {
  if (z < 0 || z >= nz()) throw DimensionError("slice index " + std::to_string(z) + " out of range");
  LabelSlice s(ny(), nx());
  std::copy_n(labels.begin() + static_cast<std::ptrdiff_t>(index(0, 0, z)), s.size(),
              s.values.begin());
  return s;
}

void LabelVolume::set_slice(int z, const LabelSlice& s) {
  if (z < 0 || z >= nz() || s.height != ny() || s.width != nx()) {
    throw DimensionError("set_slice: slice does not fit the volume");
  }
  std::copy(s.values.begin(), s.values.end(),
            labels.begin() + static_cast<std::ptrdiff_t>(index(0, 0, z)));
}

std::vector<std::uint8_t> LabelVolume::mask(int cls) const {
  std::vector<std::uint8_t> m(labels.size());
  std::transform(labels.begin(), labels.end(), m.begin(),
                 [cls](std::int32_t l) { return static_cast<std::uint8_t>(l == cls); });
  return m;
}

void LabelVolume::validate() const {
  for (std::int32_t l : labels) {
    if (l < 0 || l >= num_classes) {
      throw LabelError("label " + std::to_string(l) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace dmrseg
