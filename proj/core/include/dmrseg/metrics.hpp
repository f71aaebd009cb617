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

#ifndef DMRSEG_METRICS_HPP
#define DMRSEG_METRICS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dmrseg/volume.hpp"

namespace dmrseg::metrics {

using Mask = std::span<const std::uint8_t>;
using Dims = std::array<int, 3>;

// Overlap scores. Two empty masks agree perfectly (1.0). Size mismatch
// throws DimensionError.
double dice(Mask a, Mask b);
double jaccard(Mask a, Mask b);

/// Undefined ratios (0/0) are empty.
struct Confusion {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
};
Confusion confusion_rates(Mask pred, Mask ref);

/// Foreground voxels with at least one background 6-neighbour; voxels on the
/// grid border count. Kept on the grid so distances can use a transform.
struct SurfaceSet {
  Dims dims{0, 0, 0};
  Vec3 spacing{1, 1, 1};
  std::vector<std::array<int, 3>> voxels;  // (x, y, z)

  bool empty() const { return voxels.empty(); }
  std::size_t size() const { return voxels.size(); }
  /// Voxel centres in mm, spacing-scaled, grid origin at 0.
  std::vector<Vec3> points() const;
};

SurfaceSet surface(Mask mask, Dims dims, Vec3 spacing);

/// Exact squared distance in mm^2 from every voxel to the nearest marked
/// voxel, anisotropic spacing. All-unmarked input gives +inf everywhere.
std::vector<double> squared_edt_3d(Mask marked, Dims dims, Vec3 spacing);

/// Half the sum of the two directed mean surface distances. Empty when
/// either surface is empty; surfaces on different grids throw UsageError.
std::optional<double> msd(const SurfaceSet& a, const SurfaceSet& b);
/// Larger of the two directed maxima.
std::optional<double> hausdorff(const SurfaceSet& a, const SurfaceSet& b);

double volume_ml(Mask mask, Vec3 spacing);
std::optional<double> ejection_fraction(double edv_ml, double esv_ml);
inline constexpr double kMyocardiumDensity = 1.06;  // g / cm^3
double myo_mass(double myo_volume_ml);

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

struct BlandAltman {
  double bias = 0;
  double half_width = 0;  // 1.96 sample sd of the differences
};
std::optional<BlandAltman> bland_altman(std::span<const double> xs, std::span<const double> ys);

/// Per foreground class, keep only its largest 26-connected component. Equal
/// sizes go to the component whose first voxel comes first in memory order.
LabelVolume largest_cc_3d(const LabelVolume& labels);

/// Number of 26-connected components of `cls`.
int count_components(const LabelVolume& labels, int cls);

enum class Region : std::int8_t { kOutside = -1, kApical = 0, kMid = 1, kBasal = 2 };

/// Slice regions over the range of slices that carry any foreground: the
/// first ceil(25%) apical, the last ceil(25%) basal, the rest mid. When the
/// two ends overlap apical wins. Empty when there is no foreground.
std::optional<std::vector<Region>> region_split(const LabelVolume& ref);

}  // namespace dmrseg::metrics

#endif  // DMRSEG_METRICS_HPP
