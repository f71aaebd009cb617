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

#include "dmrseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dmrseg/error.hpp"
#include "dmrseg/kv.hpp"

namespace dmrseg::phantom {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw SpecError("phantom spec: " + msg);
}

void range(double lo, double hi, const char* name) {
  require(lo <= hi, std::string(name) + " range has min > max");
}

// Intensities before noise.
constexpr double kBackground = 0.15;
constexpr double kMyoLevel = 0.35;
constexpr double kLvLevel = 0.9;
constexpr double kRvLevel = 0.8;

struct Geometry {
  double cy = 0, cx = 0;  // LV centre, pixels
  double lv_radius = 0;   // ED, base
  double thickness = 0;
  double rv_scale = 1;
  double rv_angle = 0;    // radians
  double contraction = 1;
  std::vector<bool> empty;  // per slice
  // Background clutter: a few soft blobs away from the heart.
  struct Blob {
    double y, x, r, a;
  };
  std::vector<Blob> blobs;
};

Geometry draw_geometry(const PhantomSpec& s, int patient) {
  std::seed_seq seq{static_cast<std::uint64_t>(s.seed), static_cast<std::uint64_t>(patient),
                    std::uint64_t{0}};
  std::mt19937_64 rng(seq);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  Geometry g;
  const double j = s.center_jitter;
  g.cy = 0.5 * (s.height - 1) + uni(-j, j);
  g.cx = 0.5 * (s.width - 1) + uni(-j, j);
  g.lv_radius = uni(s.lv_radius_min, s.lv_radius_max);
  g.thickness = uni(s.myo_thickness_min, s.myo_thickness_max);
  g.rv_scale = uni(s.rv_scale_min, s.rv_scale_max);
  g.rv_angle = std::numbers::pi + uni(-0.35, 0.35);
  g.contraction = uni(s.es_contraction_min, s.es_contraction_max);
  g.empty.assign(s.slices, false);
  int apical = 0, basal = 0;
  for (int i = 0; i < s.empty_slices; ++i) {
    if (std::bernoulli_distribution(0.5)(rng)) ++apical;
    else ++basal;
  }
  for (int i = 0; i < apical; ++i) g.empty[i] = true;
  for (int i = 0; i < basal; ++i) g.empty[s.slices - 1 - i] = true;
  for (int b = 0; b < 3; ++b) {
    g.blobs.push_back({uni(0, s.height - 1.0), uni(0, s.width - 1.0), uni(3, 8), uni(0.1, 0.3)});
  }
  return g;
}

// Largest extent of the structure from the LV centre, ED base slice.
double reach(double r, double t, double rv_scale) {
  const double outer = r + t;
  return outer * 0.9 + rv_scale * outer;
}

}  // namespace

void PhantomSpec::validate() const {
  require(height >= 16 && width >= 16, "image must be at least 16 x 16");
  require(slices >= 2, "need at least two slices");
  require(spacing > 0 && slice_thickness > 0, "spacings must be positive");
  require(empty_slices >= 1 && empty_slices < slices,
          "empty_slices must leave at least one empty and one foreground slice");
  range(lv_radius_min, lv_radius_max, "lv_radius");
  range(myo_thickness_min, myo_thickness_max, "myo_thickness");
  range(rv_scale_min, rv_scale_max, "rv_scale");
  range(es_contraction_min, es_contraction_max, "es_contraction");
  require(lv_radius_min >= 2.0, "lv_radius_min must be at least 2 pixels");
  // A ring at least one pixel thick keeps every disk pixel's 4-neighbours
  // inside ring or disk.
  require(myo_thickness_min >= 1.0, "myo_thickness_min must be at least 1 pixel");
  require(rv_scale_min > 0.5, "rv_scale_min must exceed 0.5 or the RV vanishes behind the ring");
  require(es_contraction_min > 0.2 && es_contraction_max <= 1.0, "es_contraction must be in (0.2, 1]");
  require(center_jitter >= 0 && noise_sigma >= 0, "jitter and noise must be non-negative");
  const double margin = reach(lv_radius_max, myo_thickness_max, rv_scale_max) + center_jitter + 1;
  require(margin < 0.5 * std::min(height, width),
          "geometry does not fit the image: enclosing radius " + kv::format_double(margin));
}

PhantomSpec parse_spec(const std::string& text) {
  PhantomSpec s;
  for (const auto& e : kv::parse(text)) {
    const auto& k = e.key;
    if (k == "height") s.height = kv::to_int(e);
    else if (k == "width") s.width = kv::to_int(e);
    else if (k == "slices") s.slices = kv::to_int(e);
    else if (k == "spacing") s.spacing = kv::to_double(e);
    else if (k == "slice_thickness") s.slice_thickness = kv::to_double(e);
    else if (k == "empty_slices") s.empty_slices = kv::to_int(e);
    else if (k == "lv_radius_min") s.lv_radius_min = kv::to_double(e);
    else if (k == "lv_radius_max") s.lv_radius_max = kv::to_double(e);
    else if (k == "myo_thickness_min") s.myo_thickness_min = kv::to_double(e);
    else if (k == "myo_thickness_max") s.myo_thickness_max = kv::to_double(e);
    else if (k == "rv_scale_min") s.rv_scale_min = kv::to_double(e);
    else if (k == "rv_scale_max") s.rv_scale_max = kv::to_double(e);
    else if (k == "center_jitter") s.center_jitter = kv::to_double(e);
    else if (k == "es_contraction_min") s.es_contraction_min = kv::to_double(e);
    else if (k == "es_contraction_max") s.es_contraction_max = kv::to_double(e);
    else if (k == "noise_sigma") s.noise_sigma = kv::to_double(e);
    else if (k == "distractors") s.distractors = kv::to_bool(e);
    else if (k == "seed") s.seed = kv::to_u64(e);
    else throw ParseError("line " + std::to_string(e.line) + ": unknown phantom key '" + k + "'");
  }
  return s;
}

std::string format_spec(const PhantomSpec& s) {
  auto d = kv::format_double;
  std::string o;
  o += "height = " + std::to_string(s.height) + "\n";
  o += "width = " + std::to_string(s.width) + "\n";
  o += "slices = " + std::to_string(s.slices) + "\n";
  o += "spacing = " + d(s.spacing) + "\n";
  o += "slice_thickness = " + d(s.slice_thickness) + "\n";
  o += "empty_slices = " + std::to_string(s.empty_slices) + "\n";
  o += "lv_radius_min = " + d(s.lv_radius_min) + "\n";
  o += "lv_radius_max = " + d(s.lv_radius_max) + "\n";
  o += "myo_thickness_min = " + d(s.myo_thickness_min) + "\n";
  o += "myo_thickness_max = " + d(s.myo_thickness_max) + "\n";
  o += "rv_scale_min = " + d(s.rv_scale_min) + "\n";
  o += "rv_scale_max = " + d(s.rv_scale_max) + "\n";
  o += "center_jitter = " + d(s.center_jitter) + "\n";
  o += "es_contraction_min = " + d(s.es_contraction_min) + "\n";
  o += "es_contraction_max = " + d(s.es_contraction_max) + "\n";
  o += "noise_sigma = " + d(s.noise_sigma) + "\n";
  o += std::string("distractors = ") + (s.distractors ? "true" : "false") + "\n";
  o += "seed = " + std::to_string(s.seed) + "\n";
  return o;
}

std::vector<int> empty_slice_indices(const PhantomSpec& spec, int patient) {
  spec.validate();
  const Geometry g = draw_geometry(spec, patient);
  std::vector<int> out;
  for (int z = 0; z < spec.slices; ++z) {
    if (g.empty[z]) out.push_back(z);
  }
  return out;
}

std::pair<Volume, LabelVolume> gen_phantom(const PhantomSpec& spec, int patient, Phase phase) {
  spec.validate();
  if (patient < 0) throw SpecError("phantom: negative patient index");
  const Geometry g = draw_geometry(spec, patient);
  const std::array<int, 3> dims{spec.width, spec.height, spec.slices};
  const Vec3 sp{spec.spacing, spec.spacing, spec.slice_thickness};
  Volume img(dims, sp);
  LabelVolume lab(dims, sp, kNumClasses);

  std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(patient),
                    std::uint64_t{phase == Phase::kED ? 1u : 2u}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, 1.0);

  int first_fg = 0, last_fg = spec.slices - 1;
  while (g.empty[first_fg]) ++first_fg;
  while (g.empty[last_fg]) --last_fg;
  const int n_fg = last_fg - first_fg + 1;

  for (int z = 0; z < spec.slices; ++z) {
    ImageSlice is(spec.height, spec.width, kBackground);
    LabelSlice ls(spec.height, spec.width, 0);
    for (const auto& b : g.blobs) {
      for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
          const double d2 = (r - b.y) * (r - b.y) + (c - b.x) * (c - b.x);
          is.at(r, c) += b.a * std::exp(-d2 / (2 * b.r * b.r));
        }
      }
    }
    if (!g.empty[z]) {
      // Tapers from the base (last foreground slice) toward the apex.
      const double t = static_cast<double>(z - first_fg + 1) / n_fg;
      const double taper = 0.45 + 0.55 * std::sqrt(t);
      const double r_ed = g.lv_radius * taper;
      const double outer_ed = r_ed + g.thickness;
      double r = r_ed, outer = outer_ed;
      if (phase == Phase::kES) {
        r = r_ed * g.contraction;
        outer = std::sqrt(r * r + outer_ed * outer_ed - r_ed * r_ed);
      }
      const double rv_r = g.rv_scale * outer * (phase == Phase::kES ? 0.75 + 0.25 * g.contraction : 1.0);
      const double rv_cy = g.cy + 0.9 * outer * std::sin(g.rv_angle);
      const double rv_cx = g.cx + 0.9 * outer * std::cos(g.rv_angle);
      for (int row = 0; row < spec.height; ++row) {
        for (int col = 0; col < spec.width; ++col) {
          const double d = std::hypot(row - g.cy, col - g.cx);
          if (d < r) {
            ls.at(row, col) = kLv;
            is.at(row, col) = kLvLevel;
          } else if (d < outer) {
            ls.at(row, col) = kMyo;
            is.at(row, col) = kMyoLevel;
          } else if (std::hypot(row - rv_cy, col - rv_cx) < rv_r) {
            ls.at(row, col) = kRv;
            is.at(row, col) = kRvLevel;
          }
        }
      }
    } else if (spec.distractors) {
      // Looks like a small blood pool with a faint wall, labelled background.
      const double r = 0.55 * g.lv_radius;
      for (int row = 0; row < spec.height; ++row) {
        for (int col = 0; col < spec.width; ++col) {
          const double d = std::hypot(row - g.cy, col - g.cx);
          if (d < r) is.at(row, col) = 0.75;
          else if (d < r + g.thickness) is.at(row, col) = 0.28;
        }
      }
    }
    for (double& v : is.values) v += spec.noise_sigma * noise(rng);
    img.set_slice(z, is);
    lab.set_slice(z, ls);
  }
  return {std::move(img), std::move(lab)};
}

}  // namespace dmrseg::phantom
