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

#include "dmrseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dmrseg/distmap.hpp"
#include "dmrseg/error.hpp"

namespace dmrseg::metrics {
namespace {

void check_same(Mask a, Mask b) {
  if (a.size() != b.size()) throw DimensionError("mask sizes differ");
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts tally(Mask pred, Mask ref) {
  check_same(pred, ref);
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, r = ref[i] != 0;
    if (p && r) ++c.tp;
    else if (p) ++c.fp;
    else if (r) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::size_t voxel_index(const Dims& d, int x, int y, int z) {
  return (static_cast<std::size_t>(z) * d[1] + y) * d[0] + x;
}

std::size_t grid_size(const Dims& d) {
  return static_cast<std::size_t>(d[0]) * d[1] * d[2];
}

}  // namespace

double dice(Mask a, Mask b) {
  const Counts c = tally(a, b);
  const std::size_t den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

double jaccard(Mask a, Mask b) {
  const Counts c = tally(a, b);
  const std::size_t uni = c.tp + c.fp + c.fn;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(uni);
}

Confusion confusion_rates(Mask pred, Mask ref) {
  const Counts c = tally(pred, ref);
  return {ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp), ratio(c.tp, c.tp + c.fp),
          ratio(c.tn, c.tn + c.fn)};
}

std::vector<Vec3> SurfaceSet::points() const {
  std::vector<Vec3> pts;
  pts.reserve(voxels.size());
  for (const auto& v : voxels) {
    pts.push_back({v[0] * spacing[0], v[1] * spacing[1], v[2] * spacing[2]});
  }
  return pts;
}

SurfaceSet surface(Mask mask, Dims dims, Vec3 spacing) {
  if (mask.size() != grid_size(dims)) throw DimensionError("surface: mask does not match dims");
  SurfaceSet s{dims, spacing, {}};
  auto fg = [&](int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= dims[0] || y >= dims[1] || z >= dims[2]) return false;
    return mask[voxel_index(dims, x, y, z)] != 0;
  };
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        if (!fg(x, y, z)) continue;
        if (!fg(x - 1, y, z) || !fg(x + 1, y, z) || !fg(x, y - 1, z) || !fg(x, y + 1, z) ||
            !fg(x, y, z - 1) || !fg(x, y, z + 1)) {
          s.voxels.push_back({x, y, z});
        }
      }
    }
  }
  return s;
}

std::vector<double> squared_edt_3d(Mask marked, Dims dims, Vec3 spacing) {
  const std::size_t n = grid_size(dims);
  if (marked.size() != n) throw DimensionError("squared_edt_3d: mask does not match dims");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = marked[i] ? 0.0 : inf;

  // One separable pass per axis.
  std::vector<double> line, out;
  for (int axis = 0; axis < 3; ++axis) {
    const int len = dims[axis];
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? dims[0] : static_cast<std::size_t>(dims[0]) * dims[1];
    line.resize(len);
    out.resize(len);
    const int o1 = dims[(axis + 1) % 3], o2 = dims[(axis + 2) % 3];
    for (int a = 0; a < o1; ++a) {
      for (int b = 0; b < o2; ++b) {
        std::array<int, 3> c{0, 0, 0};
        c[(axis + 1) % 3] = a;
        c[(axis + 2) % 3] = b;
        const std::size_t base = voxel_index(dims, c[0], c[1], c[2]);
        for (int i = 0; i < len; ++i) line[i] = d[base + i * stride];
        distmap::squared_distance_1d(line, spacing[axis], out);
        for (int i = 0; i < len; ++i) d[base + i * stride] = out[i];
      }
    }
  }
  return d;
}

namespace {

// Distances (mm) from each voxel of `from` to the nearest voxel of `to`.
std::vector<double> directed(const SurfaceSet& from, const SurfaceSet& to) {
  if (from.dims != to.dims || from.spacing != to.spacing) {
    throw UsageError("surface sets live on different grids");
  }
  std::vector<std::uint8_t> marked(grid_size(to.dims), 0);
  for (const auto& v : to.voxels) marked[voxel_index(to.dims, v[0], v[1], v[2])] = 1;
  const std::vector<double> sq = squared_edt_3d(marked, to.dims, to.spacing);
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& v : from.voxels) out.push_back(std::sqrt(sq[voxel_index(from.dims, v[0], v[1], v[2])]));
  return out;
}

}  // namespace

std::optional<double> msd(const SurfaceSet& a, const SurfaceSet& b) {
  if (a.empty() || b.empty()) return std::nullopt;
  const auto ab = directed(a, b), ba = directed(b, a);
  const double mab = std::accumulate(ab.begin(), ab.end(), 0.0) / static_cast<double>(ab.size());
  const double mba = std::accumulate(ba.begin(), ba.end(), 0.0) / static_cast<double>(ba.size());
  return 0.5 * (mab + mba);
}

std::optional<double> hausdorff(const SurfaceSet& a, const SurfaceSet& b) {
  if (a.empty() || b.empty()) return std::nullopt;
  const auto ab = directed(a, b), ba = directed(b, a);
  return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
}

double volume_ml(Mask mask, Vec3 spacing) {
  const auto count = std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
  return static_cast<double>(count) * spacing[0] * spacing[1] * spacing[2] / 1000.0;
}

std::optional<double> ejection_fraction(double edv_ml, double esv_ml) {
  if (!(edv_ml > 0)) return std::nullopt;
  return (edv_ml - esv_ml) / edv_ml * 100.0;
}

double myo_mass(double myo_volume_ml) {
  if (myo_volume_ml < 0) throw UsageError("myo_mass: negative volume");
  return myo_volume_ml * kMyocardiumDensity;
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionError("pearson: sequences differ in length");
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<BlandAltman> bland_altman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionError("bland_altman: sequences differ in length");
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += xs[i] - ys[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - ys[i] - mean;
    ss += d * d;
  }
  return BlandAltman{mean, 1.96 * std::sqrt(ss / static_cast<double>(n - 1))};
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  // Root is always the smaller index, so it is the component's first voxel.
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
};

// Root index per voxel of class `cls`, or UINT32_MAX.
std::vector<std::uint32_t> label_components(const LabelVolume& lv, int cls) {
  const Dims d = lv.dims;
  const std::size_t n = lv.size();
  UnionFind uf(n);
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const std::size_t i = voxel_index(d, x, y, z);
        if (lv.labels[i] != cls) continue;
        // Causal half of the 26-neighbourhood.
        for (int dz = -1; dz <= 0; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
              const int nx = x + dx, ny = y + dy, nz = z + dz;
              if (nx < 0 || ny < 0 || nz < 0 || nx >= d[0] || ny >= d[1]) continue;
              const std::size_t j = voxel_index(d, nx, ny, nz);
              if (lv.labels[j] == cls) uf.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
            }
          }
        }
      }
    }
  }
  std::vector<std::uint32_t> root(n, UINT32_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    if (lv.labels[i] == cls) root[i] = uf.find(static_cast<std::uint32_t>(i));
  }
  return root;
}

}  // namespace

LabelVolume largest_cc_3d(const LabelVolume& labels) {
  LabelVolume out = labels;
  const std::size_t n = labels.size();
  std::vector<std::uint32_t> size(n);
  for (int cls = 1; cls < labels.num_classes; ++cls) {
    const auto root = label_components(labels, cls);
    std::fill(size.begin(), size.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (root[i] != UINT32_MAX) ++size[root[i]];
    }
    std::uint32_t best = UINT32_MAX, best_size = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (size[r] > best_size) {  // strict: earlier root wins ties
        best_size = size[r];
        best = static_cast<std::uint32_t>(r);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (root[i] != UINT32_MAX && root[i] != best) out.labels[i] = 0;
    }
  }
  return out;
}

int count_components(const LabelVolume& labels, int cls) {
  const auto root = label_components(labels, cls);
  int count = 0;
  for (std::size_t i = 0; i < root.size(); ++i) {
    if (root[i] == i) ++count;
  }
  return count;
}

std::optional<std::vector<Region>> region_split(const LabelVolume& ref) {
  const int nz = ref.nz();
  const std::size_t plane = static_cast<std::size_t>(ref.nx()) * ref.ny();
  int first = -1, last = -1;
  for (int z = 0; z < nz; ++z) {
    const auto* p = ref.labels.data() + z * plane;
    if (std::any_of(p, p + plane, [](std::int32_t v) { return v > 0; })) {
      if (first < 0) first = z;
      last = z;
    }
  }
  if (first < 0) return std::nullopt;
  const int count = last - first + 1;
  const int quarter = (count + 3) / 4;  // ceil(count / 4)
  std::vector<Region> regions(nz, Region::kOutside);
  for (int z = first; z <= last; ++z) {
    const int k = z - first;
    if (k < quarter) regions[z] = Region::kApical;
    else if (k >= count - quarter) regions[z] = Region::kBasal;
    else regions[z] = Region::kMid;
  }
  return regions;
}

}  // namespace dmrseg::metrics
