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

#ifndef DMRSEG_DISTMAP_HPP
#define DMRSEG_DISTMAP_HPP

#include <span>
#include <vector>

#include "dmrseg/volume.hpp"

namespace dmrseg::distmap {

inline constexpr double kDefaultThreshold = 250.0;  // pixels

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

/// Per-foreground-class truncated signed distance planes for one slice.
/// channels[k - 1] belongs to class k.
struct DistanceMapStack {
  int height = 0;
  int width = 0;
  double threshold = kDefaultThreshold;
  std::vector<ImageSlice> channels;
};

/// Lower envelope of parabolas along one line: out[p] = min_q f[q] + (w (p - q))^2.
/// Entries of f that are +inf do not contribute. `out` may alias nothing in f.
void squared_distance_1d(std::span<const double> f, double spacing, std::span<double> out);

/// Foreground pixels with a background 4-neighbour. Pixels on the image
/// border count as boundary.
std::vector<Pixel> boundary_pixels(const BinarySlice& mask);

/// Exact squared Euclidean distance (pixel units) from every pixel of the
/// mask's grid to the nearest target. Throws UsageError on empty targets.
ImageSlice squared_edt(const BinarySlice& mask, std::span<const Pixel> targets);
ImageSlice edt(const BinarySlice& mask, std::span<const Pixel> targets);

/// Truncated signed distance of `class_id` in `labels`: +d inside the class,
/// -min(d, T) outside, constant -T when the class is absent.
ImageSlice signed_truncated_dm(const LabelSlice& labels, int class_id, double threshold,
                               int num_classes);

DistanceMapStack dm_stack(const LabelSlice& labels, int num_classes,
                          double threshold = kDefaultThreshold);

/// Zero-levelset decoding: class k where channel k-1 is positive, the
/// largest positive channel when several are, background otherwise.
LabelSlice segmentation_from_dm(const DistanceMapStack& stack);

}  // namespace dmrseg::distmap

#endif  // DMRSEG_DISTMAP_HPP
