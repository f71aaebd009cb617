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

#include "dmrseg/distmap.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dmrseg/error.hpp"

namespace dmrseg::distmap {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void squared_distance_1d(std::span<const double> f, double spacing, std::span<double> out) {
  const int n = static_cast<int>(f.size());
  const double w2 = spacing * spacing;
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  auto cross = [&](int q, int r) {
    return ((f[r] + w2 * r * r) - (f[q] + w2 * q * q)) / (2.0 * w2 * (r - q));
  };
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = cross(v[k], q);
    while (s <= z[k]) {
      --k;
      s = cross(v[k], q);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  int j = 0;
  for (int p = 0; p < n; ++p) {
    while (z[j + 1] < p) ++j;
    const double d = p - v[j];
    out[p] = w2 * d * d + f[v[j]];
  }
}

std::vector<Pixel> boundary_pixels(const BinarySlice& mask) {
  std::vector<Pixel> out;
  const int h = mask.height, w = mask.width;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      const bool edge = r == 0 || c == 0 || r == h - 1 || c == w - 1;
      if (edge || !mask.at(r - 1, c) || !mask.at(r + 1, c) || !mask.at(r, c - 1) ||
          !mask.at(r, c + 1)) {
        out.push_back({r, c});
      }
    }
  }
  return out;
}

ImageSlice squared_edt(const BinarySlice& mask, std::span<const Pixel> targets) {
  if (targets.empty()) throw UsageError("edt: target set is empty");
  const int h = mask.height, w = mask.width;
  ImageSlice grid(h, w, kInf);
  for (const Pixel& p : targets) {
    if (p.row < 0 || p.row >= h || p.col < 0 || p.col >= w) {
      throw DimensionError("edt: target outside the grid");
    }
    grid.at(p.row, p.col) = 0.0;
  }
  std::vector<double> line(std::max(h, w)), res(std::max(h, w));
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) line[r] = grid.at(r, c);
    squared_distance_1d(std::span(line).first(h), 1.0, std::span(res).first(h));
    for (int r = 0; r < h; ++r) grid.at(r, c) = res[r];
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) line[c] = grid.at(r, c);
    squared_distance_1d(std::span(line).first(w), 1.0, std::span(res).first(w));
    for (int c = 0; c < w; ++c) grid.at(r, c) = res[c];
  }
  return grid;
}

ImageSlice edt(const BinarySlice& mask, std::span<const Pixel> targets) {
  ImageSlice d = squared_edt(mask, targets);
  for (double& v : d.values) v = std::sqrt(v);
  return d;
}

ImageSlice signed_truncated_dm(const LabelSlice& labels, int class_id, double threshold,
                               int num_classes) {
  if (!(threshold > 0)) throw UsageError("distance threshold must be positive");
  if (class_id < 1 || class_id >= num_classes) {
    throw LabelError("class id " + std::to_string(class_id) + " is not a foreground class of " +
                     std::to_string(num_classes));
  }
  BinarySlice fg(labels.height, labels.width);
  bool present = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    fg.values[i] = labels.values[i] == class_id;
    present |= fg.values[i] != 0;
  }
  ImageSlice out(labels.height, labels.width, -threshold);
  if (!present) return out;
  const auto border = boundary_pixels(fg);
  const ImageSlice d = edt(fg, border);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values[i] = fg.values[i] ? d.values[i] : -std::min(d.values[i], threshold);
  }
  return out;
}

DistanceMapStack dm_stack(const LabelSlice& labels, int num_classes, double threshold) {
  if (num_classes < 2) throw UsageError("dm_stack needs at least two classes");
  DistanceMapStack s{labels.height, labels.width, threshold, {}};
  s.channels.reserve(num_classes - 1);
  for (int k = 1; k < num_classes; ++k) {
    s.channels.push_back(signed_truncated_dm(labels, k, threshold, num_classes));
  }
  return s;
}

LabelSlice segmentation_from_dm(const DistanceMapStack& stack) {
  LabelSlice out(stack.height, stack.width, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double best = 0.0;
    for (std::size_t k = 0; k < stack.channels.size(); ++k) {
      const double v = stack.channels[k].values[i];
      if (v > best) {
        best = v;
        out.values[i] = static_cast<std::int32_t>(k + 1);
      }
    }
  }
  return out;
}

}  // namespace dmrseg::distmap
