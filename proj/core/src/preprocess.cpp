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

#include "dmrseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "dmrseg/error.hpp"

namespace dmrseg::prep {
namespace {

int out_extent(int extent, double in, double out) {
  return std::max(1, static_cast<int>(std::lround(extent * in / out)));
}

void check_spacing(PlaneSpacing s) {
  if (!(s.row > 0) || !(s.col > 0)) throw SpecError("pixel spacing must be positive");
}

// Source coordinate of output pixel centre i.
double source_coord(int i, double in, double out) { return (i + 0.5) * (out / in) - 0.5; }

double bilinear_clamped(const ImageSlice& s, double r, double c) {
  r = std::clamp(r, 0.0, static_cast<double>(s.height - 1));
  c = std::clamp(c, 0.0, static_cast<double>(s.width - 1));
  const int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
  const int r1 = std::min(r0 + 1, s.height - 1), c1 = std::min(c0 + 1, s.width - 1);
  const double fr = r - r0, fc = c - c0;
  return (1 - fr) * ((1 - fc) * s.at(r0, c0) + fc * s.at(r0, c1)) +
         fr * ((1 - fc) * s.at(r1, c0) + fc * s.at(r1, c1));
}

// Zero outside [0, n-1]; partially outside neighbours contribute zero.
double bilinear_zero(const ImageSlice& s, double r, double c) {
  const int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
  const double fr = r - r0, fc = c - c0;
  auto px = [&](int rr, int cc) {
    return (rr < 0 || cc < 0 || rr >= s.height || cc >= s.width) ? 0.0 : s.at(rr, cc);
  };
  return (1 - fr) * ((1 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
         fr * ((1 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
}

}  // namespace

ImageSlice resample_slice(const ImageSlice& slice, PlaneSpacing in, PlaneSpacing out) {
  check_spacing(in);
  check_spacing(out);
  const int h = out_extent(slice.height, in.row, out.row);
  const int w = out_extent(slice.width, in.col, out.col);
  ImageSlice res(h, w);
  for (int r = 0; r < h; ++r) {
    const double sr = source_coord(r, in.row, out.row);
    for (int c = 0; c < w; ++c) {
      res.at(r, c) = bilinear_clamped(slice, sr, source_coord(c, in.col, out.col));
    }
  }
  return res;
}

LabelSlice resample_labels(const LabelSlice& slice, PlaneSpacing in, PlaneSpacing out) {
  check_spacing(in);
  check_spacing(out);
  const int h = out_extent(slice.height, in.row, out.row);
  const int w = out_extent(slice.width, in.col, out.col);
  LabelSlice res(h, w);
  for (int r = 0; r < h; ++r) {
    const int sr = std::clamp(static_cast<int>(std::floor(source_coord(r, in.row, out.row) + 0.5)),
                              0, slice.height - 1);
    for (int c = 0; c < w; ++c) {
      const int sc = std::clamp(
          static_cast<int>(std::floor(source_coord(c, in.col, out.col) + 0.5)), 0, slice.width - 1);
      res.at(r, c) = slice.at(sr, sc);
    }
  }
  return res;
}

template <typename T>
Slice2D<T> crop_or_pad(const Slice2D<T>& slice, int height, int width) {
  if (height < 1 || width < 1) throw SpecError("crop_or_pad: target extent must be positive");
  Slice2D<T> out(height, width, T{});
  // Offset of the source origin inside the target; negative means crop.
  const int dr = (height - slice.height) >= 0 ? (height - slice.height) / 2
                                              : -((slice.height - height) / 2);
  const int dc = (width - slice.width) >= 0 ? (width - slice.width) / 2
                                            : -((slice.width - width) / 2);
  for (int r = 0; r < height; ++r) {
    const int sr = r - dr;
    if (sr < 0 || sr >= slice.height) continue;
    for (int c = 0; c < width; ++c) {
      const int sc = c - dc;
      if (sc >= 0 && sc < slice.width) out.at(r, c) = slice.at(sr, sc);
    }
  }
  return out;
}

template Slice2D<double> crop_or_pad(const Slice2D<double>&, int, int);
template Slice2D<std::int32_t> crop_or_pad(const Slice2D<std::int32_t>&, int, int);
template Slice2D<std::uint8_t> crop_or_pad(const Slice2D<std::uint8_t>&, int, int);

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw UsageError("percentile of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Volume normalize_intensity(const Volume& vol) {
  Volume out = vol;
  if (vol.voxels.empty()) return out;
  const double cap = percentile(vol.voxels, 0.99);
  double sum = 0;
  for (double& v : out.voxels) {
    v = std::min(v, cap);
    sum += v;
  }
  const double n = static_cast<double>(out.size());
  const double mean = sum / n;
  double ss = 0;
  for (double v : out.voxels) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (sd < 1e-6) {
    std::fill(out.voxels.begin(), out.voxels.end(), 0.0);
    return out;
  }
  for (double& v : out.voxels) v = (v - mean) / sd;
  return out;
}

namespace {

std::tuple<Volume, LabelVolume> resample_and_fit(const Volume& image, const LabelVolume* labels,
                                                 const PreprocessConfig& cfg) {
  const PlaneSpacing in{image.spacing[1], image.spacing[0]};
  const PlaneSpacing out{cfg.spacing, cfg.spacing};
  const std::array<int, 3> dims{cfg.width, cfg.height, image.nz()};
  const Vec3 sp{cfg.spacing, cfg.spacing, image.spacing[2]};
  Volume img(dims, sp);
  img.origin = image.origin;
  LabelVolume lab;
  if (labels) {
    lab = LabelVolume(dims, sp, labels->num_classes);
    lab.origin = labels->origin;
  }
  for (int z = 0; z < image.nz(); ++z) {
    img.set_slice(z, crop_or_pad(resample_slice(image.slice(z), in, out), cfg.height, cfg.width));
    if (labels) {
      lab.set_slice(z, crop_or_pad(resample_labels(labels->slice(z), in, out), cfg.height,
                                   cfg.width));
    }
  }
  return {std::move(img), std::move(lab)};
}

}  // namespace

std::pair<Volume, LabelVolume> preprocess_case(const Volume& image, const LabelVolume& labels,
                                               const PreprocessConfig& cfg) {
  if (image.dims != labels.dims) throw DimensionError("image and label volumes differ in extent");
  auto [img, lab] = resample_and_fit(image, &labels, cfg);
  return {normalize_intensity(img), std::move(lab)};
}

Volume preprocess_image(const Volume& image, const PreprocessConfig& cfg) {
  auto [img, lab] = resample_and_fit(image, nullptr, cfg);
  return normalize_intensity(img);
}

Similarity sample_similarity(std::mt19937_64& rng, int height, int width) {
  std::uniform_real_distribution<double> scale(0.8, 1.2), rot(0.0, 360.0), shift(-0.125, 0.125);
  Similarity t;
  t.scale = scale(rng);
  t.rotation_deg = rot(rng);
  t.shift_row = shift(rng) * height;
  t.shift_col = shift(rng) * width;
  return t;
}

std::pair<ImageSlice, LabelSlice> apply_similarity(const ImageSlice& image,
                                                   const LabelSlice& labels, const Similarity& t) {
  if (image.height != labels.height || image.width != labels.width) {
    throw DimensionError("augment: image and labels differ in extent");
  }
  if (!(t.scale > 0)) throw SpecError("similarity scale must be positive");
  const int h = image.height, w = image.width;
  const double cr = 0.5 * (h - 1), cc = 0.5 * (w - 1);
  const double th = t.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  ImageSlice img(h, w);
  LabelSlice lab(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // Inverse map: output pixel -> source position.
      const double y = (r - cr - t.shift_row) / t.scale;
      const double x = (c - cc - t.shift_col) / t.scale;
      const double sr = cr + cs * y - sn * x;
      const double sc = cc + sn * y + cs * x;
      img.at(r, c) = bilinear_zero(image, sr, sc);
      const int nr = static_cast<int>(std::floor(sr + 0.5));
      const int nc = static_cast<int>(std::floor(sc + 0.5));
      if (nr >= 0 && nr < h && nc >= 0 && nc < w) lab.at(r, c) = labels.at(nr, nc);
    }
  }
  return {std::move(img), std::move(lab)};
}

std::pair<ImageSlice, LabelSlice> augment(const ImageSlice& image, const LabelSlice& labels,
                                          std::mt19937_64& rng) {
  return apply_similarity(image, labels, sample_similarity(rng, image.height, image.width));
}

}  // namespace dmrseg::prep
