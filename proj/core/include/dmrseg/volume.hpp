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

#ifndef DMRSEG_VOLUME_HPP
#define DMRSEG_VOLUME_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace dmrseg {

/// Row-major 2D grid: value (row, col) lives at row * width + col.
template <typename T>
struct Slice2D {
  int height = 0;
  int width = 0;
  std::vector<T> values;

  Slice2D() = default;
  Slice2D(int h, int w, T fill = T{})
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const { return values.size(); }
  T& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  const T& at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  bool operator==(const Slice2D&) const = default;
};

using ImageSlice = Slice2D<double>;
using LabelSlice = Slice2D<std::int32_t>;
using BinarySlice = Slice2D<std::uint8_t>;

using Vec3 = std::array<double, 3>;

/// Real-valued voxel grid. x varies fastest, then y, then z; a z-slice is a
/// height = ny by width = nx image.
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};  // mm
  Vec3 origin{0.0, 0.0, 0.0};   // mm
  std::vector<double> voxels;

  Volume() = default;
  Volume(std::array<int, 3> d, Vec3 sp);

  std::size_t size() const { return voxels.size(); }
  int nx() const { return dims[0]; }
  int ny() const { return dims[1]; }
  int nz() const { return dims[2]; }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  }
  ImageSlice slice(int z) const;
  void set_slice(int z, const ImageSlice& s);
};

/// Integer label grid with the same layout as Volume.
struct LabelVolume {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  int num_classes = 2;
  std::vector<std::int32_t> labels;

  LabelVolume() = default;
  LabelVolume(std::array<int, 3> d, Vec3 sp, int classes);

  std::size_t size() const { return labels.size(); }
  int nx() const { return dims[0]; }
  int ny() const { return dims[1]; }
  int nz() const { return dims[2]; }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  }
  LabelSlice slice(int z) const;
  void set_slice(int z, const LabelSlice& s);
  /// Binary mask of voxels carrying `cls`.
  std::vector<std::uint8_t> mask(int cls) const;
  /// Throws LabelError if any label is negative or >= num_classes.
  void validate() const;
};

}  // namespace dmrseg

#endif  // DMRSEG_VOLUME_HPP
