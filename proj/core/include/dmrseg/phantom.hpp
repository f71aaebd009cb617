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

#ifndef DMRSEG_PHANTOM_HPP
#define DMRSEG_PHANTOM_HPP

#include <cstdint>
#include <string>
#include <utility>

#include "dmrseg/volume.hpp"

namespace dmrseg::phantom {

// Labels: 0 background, 1 RV crescent, 2 myocardium ring, 3 LV disk.
inline constexpr int kNumClasses = 4;
inline constexpr int kRv = 1;
inline constexpr int kMyo = 2;
inline constexpr int kLv = 3;

enum class Phase { kED, kES };

/// Geometry in pixels unless stated. Radii are end-diastolic values at the
/// basal-most foreground slice; they taper toward the apex.
struct PhantomSpec {
  int height = 64;
  int width = 64;
  int slices = 10;
  double spacing = 1.5625;         // mm in-plane
  double slice_thickness = 10.0;   // mm
  int empty_slices = 1;            // per volume, placed at the apical or basal end
  double lv_radius_min = 6.0;
  double lv_radius_max = 9.0;
  double myo_thickness_min = 2.5;
  double myo_thickness_max = 3.5;
  double rv_scale_min = 0.9;       // RV radius / (LV radius + thickness)
  double rv_scale_max = 1.2;
  double center_jitter = 4.0;      // max offset of the LV centre from the image centre
  double es_contraction_min = 0.6; // ES / ED LV radius
  double es_contraction_max = 0.8;
  double noise_sigma = 0.08;
  bool distractors = true;         // LV-like blob and faint ring on empty slices
  std::uint64_t seed = 0;

  /// SpecError naming the broken rule.
  void validate() const;
};

/// Parses `key = value` text; unknown keys throw ParseError.
PhantomSpec parse_spec(const std::string& text);
std::string format_spec(const PhantomSpec& spec);

/// Both phases of one patient share geometry; the ES phase has a smaller
/// blood pool with the same myocardial area. Slice 0 is the apical end.
std::pair<Volume, LabelVolume> gen_phantom(const PhantomSpec& spec, int patient, Phase phase);

/// Indices of slices generated without foreground.
std::vector<int> empty_slice_indices(const PhantomSpec& spec, int patient);

}  // namespace dmrseg::phantom

#endif  // DMRSEG_PHANTOM_HPP
