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

#ifndef DMRSEG_PREPROCESS_HPP
#define DMRSEG_PREPROCESS_HPP

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "dmrseg/volume.hpp"

namespace dmrseg::prep {

inline constexpr double kTargetSpacing = 1.5625;  // mm per pixel

/// In-plane pixel spacing, rows then columns.
struct PlaneSpacing {
  double row = 1.0;
  double col = 1.0;
};

// Output extent per axis is round(extent * in / out). Pixel centres are
// aligned, so equal spacings reproduce the input exactly. Samples beyond the
// input edge replicate the border.
ImageSlice resample_slice(const ImageSlice& slice, PlaneSpacing in,
                          PlaneSpacing out = {kTargetSpacing, kTargetSpacing});
LabelSlice resample_labels(const LabelSlice& slice, PlaneSpacing in,
                           PlaneSpacing out = {kTargetSpacing, kTargetSpacing});

/// Centred crop / zero pad. Odd remainders go to the bottom and right.
template <typename T>
Slice2D<T> crop_or_pad(const Slice2D<T>& slice, int height, int width);

/// Linear interpolation between order statistics; p in [0, 1].
double percentile(std::span<const double> values, double p);

/// Clip at the 99th percentile, then z-score. Near-constant volumes
/// (sd < 1e-6 after clipping) map to all zeros.
Volume normalize_intensity(const Volume& vol);

struct PreprocessConfig {
  double spacing = kTargetSpacing;
  int height = 256;
  int width = 256;
};

/// resample -> crop/pad -> clip + normalise, slice by slice in-plane.
std::pair<Volume, LabelVolume> preprocess_case(const Volume& image, const LabelVolume& labels,
                                               const PreprocessConfig& cfg);
Volume preprocess_image(const Volume& image, const PreprocessConfig& cfg);

/// Similarity transform about the image centre.
struct Similarity {
  double scale = 1.0;
  double rotation_deg = 0.0;
  double shift_row = 0.0;  // pixels
  double shift_col = 0.0;
};

/// scale U(0.8, 1.2), rotation U(0, 360), shift U(-1/8, 1/8) of each extent.
Similarity sample_similarity(std::mt19937_64& rng, int height, int width);

/// Bilinear for intensities, nearest for labels; outside the source the
/// image reads 0 and the labels background.
std::pair<ImageSlice, LabelSlice> apply_similarity(const ImageSlice& image,
                                                   const LabelSlice& labels, const Similarity& t);

std::pair<ImageSlice, LabelSlice> augment(const ImageSlice& image, const LabelSlice& labels,
                                          std::mt19937_64& rng);

}  // namespace dmrseg::prep

#endif  // DMRSEG_PREPROCESS_HPP
