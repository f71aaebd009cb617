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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dmrseg/error.hpp"
#include "dmrseg/metrics.hpp"
#include "oracles.hpp"

namespace dmrseg::metrics {
namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes random_bytes(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution b(p);
  Bytes m(n);
  for (auto& v : m) v = b(rng);
  return m;
}

// Blob-shaped 3D mask: union of a few random boxes.
Bytes random_blob(std::mt19937_64& rng, Dims d) {
  Bytes m(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0);
  const int boxes = 1 + static_cast<int>(rng() % 3);
  for (int b = 0; b < boxes; ++b) {
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = static_cast<int>(rng() % d[a]);
      hi[a] = std::min(d[a], lo[a] + 1 + static_cast<int>(rng() % 4));
    }
    for (int z = lo[2]; z < hi[2]; ++z)
      for (int y = lo[1]; y < hi[1]; ++y)
        for (int x = lo[0]; x < hi[0]; ++x) m[(static_cast<std::size_t>(z) * d[1] + y) * d[0] + x] = 1;
  }
  return m;
}

TEST(Overlap, Examples) {
  const Bytes a{1, 1, 1, 1, 0, 0}, b{0, 0, 1, 1, 1, 1}, e(6, 0);
  EXPECT_DOUBLE_EQ(dice(a, b), 0.5);
  EXPECT_DOUBLE_EQ(jaccard(a, b), 2.0 / 6.0);
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(jaccard(a, a), 1.0);
  EXPECT_EQ(dice(e, e), 1.0);
  EXPECT_EQ(jaccard(e, e), 1.0);
  const Bytes c{0, 0, 0, 0, 1, 1};
  EXPECT_EQ(dice(a, c), 0.0);
  EXPECT_THROW(dice(a, Bytes(5)), DimensionError);
}

TEST(Overlap, JaccardIdentityAndSymmetry) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const auto a = random_bytes(rng, 300, 0.3), b = random_bytes(rng, 300, 0.4);
    const double d = dice(a, b);
    EXPECT_NEAR(jaccard(a, b), d / (2 - d), 1e-12);
    EXPECT_EQ(d, dice(b, a));
    EXPECT_EQ(jaccard(a, b), jaccard(b, a));
  }
}

TEST(Confusion, PerfectInvertedAndTally) {
  const Bytes ref{1, 0, 1, 0};
  const auto p = confusion_rates(ref, ref);
  EXPECT_EQ(p.sensitivity, 1.0);
  EXPECT_EQ(p.specificity, 1.0);
  EXPECT_EQ(p.ppv, 1.0);
  EXPECT_EQ(p.npv, 1.0);
  const Bytes inv{0, 1, 0, 1};
  EXPECT_EQ(confusion_rates(inv, ref).sensitivity, 0.0);
  const auto none = confusion_rates(Bytes(4, 0), Bytes(4, 0));
  EXPECT_FALSE(none.sensitivity.has_value());
  EXPECT_FALSE(none.ppv.has_value());
  EXPECT_EQ(none.specificity, 1.0);

  std::mt19937_64 rng(2);
  const auto pr = random_bytes(rng, 64, 0.5), rf = random_bytes(rng, 64, 0.5);
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (int i = 0; i < 64; ++i) {
    if (pr[i] && rf[i]) ++tp;
    else if (pr[i]) ++fp;
    else if (rf[i]) ++fn;
    else ++tn;
  }
  const auto c = confusion_rates(pr, rf);
  EXPECT_DOUBLE_EQ(*c.sensitivity, tp / (tp + fn));
  EXPECT_DOUBLE_EQ(*c.specificity, tn / (tn + fp));
  EXPECT_DOUBLE_EQ(*c.ppv, tp / (tp + fp));
  EXPECT_DOUBLE_EQ(*c.npv, tn / (tn + fn));
}

TEST(Surface, Examples) {
  Bytes one(27, 0);
  one[13] = 1;
  const auto s1 = surface(one, {3, 3, 3}, {1, 1, 1});
  ASSERT_EQ(s1.size(), 1u);
  EXPECT_EQ(s1.voxels[0], (std::array<int, 3>{1, 1, 1}));
  EXPECT_EQ(surface(Bytes(27, 1), {3, 3, 3}, {1, 1, 1}).size(), 26u);
  EXPECT_TRUE(surface(Bytes(27, 0), {3, 3, 3}, {1, 1, 1}).empty());
  Bytes block(125, 0);
  for (int z = 1; z < 4; ++z)
    for (int y = 1; y < 4; ++y)
      for (int x = 1; x < 4; ++x) block[(z * 5 + y) * 5 + x] = 1;
  EXPECT_EQ(surface(block, {5, 5, 5}, {1, 1, 1}).size(), 26u);
  const auto pts = surface(one, {3, 3, 3}, {2, 3, 4}).points();
  EXPECT_EQ(pts[0], (Vec3{2, 3, 4}));
}

TEST(Surface, MatchesNeighbourEnumeration) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const Dims d{6, 5, 4};
    const auto m = random_bytes(rng, 120, 0.6);
    auto got = surface(m, d, {1, 1, 1}).voxels;
    auto want = testing::brute_surface_voxels(m, d);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want);
  }
}

TEST(SurfaceDistance, Examples) {
  Bytes a(10, 0), b(10, 0);
  a[1] = 1;
  b[4] = 1;
  const auto sa = surface(a, {10, 1, 1}, {1, 1, 1}), sb = surface(b, {10, 1, 1}, {1, 1, 1});
  EXPECT_DOUBLE_EQ(*msd(sa, sb), 3.0);
  EXPECT_DOUBLE_EQ(*hausdorff(sa, sb), 3.0);
  EXPECT_EQ(*msd(sa, sa), 0.0);
  EXPECT_EQ(*hausdorff(sa, sa), 0.0);
  const auto empty = surface(Bytes(10, 0), {10, 1, 1}, {1, 1, 1});
  EXPECT_FALSE(msd(sa, empty).has_value());
  EXPECT_FALSE(hausdorff(empty, sb).has_value());
  EXPECT_THROW(msd(sa, surface(a, {5, 2, 1}, {1, 1, 1})), UsageError);
}

TEST(SurfaceDistance, MatchesBruteForceAndScales) {
  std::mt19937_64 rng(4);
  const Dims d{9, 8, 5};
  for (int rep = 0; rep < 60; ++rep) {
    const auto a = random_blob(rng, d), b = random_blob(rng, d);
    const Vec3 sp{1.25, 0.8, 2.5};
    const auto sa = surface(a, d, sp), sb = surface(b, d, sp);
    const auto want = testing::brute_surface_distances(sa, sb);
    ASSERT_TRUE(want.has_value());
    const double m = *msd(sa, sb), h = *hausdorff(sa, sb);
    EXPECT_NEAR(m, want->msd, 1e-9);
    EXPECT_NEAR(h, want->hd, 1e-9);
    EXPECT_GE(h, m);
    EXPECT_NEAR(*msd(sb, sa), m, 1e-12);
    const Vec3 sp3{3 * sp[0], 3 * sp[1], 3 * sp[2]};
    EXPECT_NEAR(*msd(surface(a, d, sp3), surface(b, d, sp3)), 3 * m, 1e-9);
    EXPECT_NEAR(*hausdorff(surface(a, d, sp3), surface(b, d, sp3)), 3 * h, 1e-9);
  }
}

TEST(SquaredEdt3d, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  const Dims d{5, 4, 3};
  const Vec3 sp{1.0, 2.0, 0.5};
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = random_bytes(rng, 60, 0.15);
    const auto got = squared_edt_3d(m, d, sp);
    for (int i = 0; i < 60; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < 60; ++j) {
        if (!m[j]) continue;
        const double dx = (i % 5 - j % 5) * sp[0], dy = (i / 5 % 4 - j / 5 % 4) * sp[1],
                     dz = (i / 20 - j / 20) * sp[2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      EXPECT_NEAR(got[i], best, 1e-9);
    }
  }
}

TEST(Clinical, Volumes) {
  EXPECT_DOUBLE_EQ(volume_ml(Bytes(1000, 1), {1, 1, 1}), 1.0);
  EXPECT_EQ(volume_ml(Bytes(10, 0), {1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(volume_ml(Bytes(8, 1), {2.5, 2.5, 2.5}), 0.125);
}

TEST(Clinical, EjectionFractionAndMass) {
  EXPECT_EQ(*ejection_fraction(100, 40), 60.0);
  EXPECT_EQ(*ejection_fraction(80, 80), 0.0);
  EXPECT_EQ(*ejection_fraction(80, 0), 100.0);
  EXPECT_FALSE(ejection_fraction(0, 0).has_value());
  EXPECT_EQ(myo_mass(100), 106.0);
  EXPECT_EQ(myo_mass(0), 0.0);
  EXPECT_DOUBLE_EQ(myo_mass(37.5), 39.75);
  EXPECT_THROW(myo_mass(-1), UsageError);
}

TEST(Agreement, Pearson) {
  const std::vector<double> x{1, 2, 3, 4, 7};
  std::vector<double> y2, yn;
  for (double v : x) y2.push_back(2 * v), yn.push_back(-v);
  EXPECT_NEAR(*pearson(x, y2), 1.0, 1e-12);
  EXPECT_NEAR(*pearson(x, yn), -1.0, 1e-12);
  EXPECT_FALSE(pearson(x, std::vector<double>(5, 3.0)).has_value());
  EXPECT_FALSE(pearson(std::vector<double>{1}, std::vector<double>{2}).has_value());

  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a(50), b(50);
  for (int i = 0; i < 50; ++i) a[i] = n(rng), b[i] = 0.5 * a[i] + n(rng);
  // Second implementation: raw-moment formula.
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < 50; ++i) sa += a[i], sb += b[i], sab += a[i] * b[i], saa += a[i] * a[i], sbb += b[i] * b[i];
  const double r = (50 * sab - sa * sb) / std::sqrt((50 * saa - sa * sa) * (50 * sbb - sb * sb));
  EXPECT_NEAR(*pearson(a, b), r, 1e-12);
}

TEST(Agreement, BlandAltman) {
  const std::vector<double> x{3, 5}, y{2, 2};
  const auto ba = bland_altman(x, y);
  ASSERT_TRUE(ba.has_value());
  EXPECT_NEAR(ba->bias, 2.0, 1e-12);
  EXPECT_NEAR(ba->half_width, 1.96 * std::sqrt(2.0), 1e-9);
  const auto same = bland_altman(x, x);
  EXPECT_EQ(same->bias, 0.0);
  EXPECT_EQ(same->half_width, 0.0);
  const std::vector<double> y5{7, 7};
  EXPECT_NEAR(bland_altman(x, y5)->bias, ba->bias - 5, 1e-12);
  EXPECT_NEAR(bland_altman(x, y5)->half_width, ba->half_width, 1e-12);
  EXPECT_FALSE(bland_altman(std::vector<double>{1}, std::vector<double>{1}).has_value());
}

TEST(Components, SizeFiveBeatsSizeThree) {
  LabelVolume v({10, 1, 1}, {1, 1, 1}, 2);
  for (int x : {0, 1, 2, 3, 4, 6, 7, 8}) v.labels[x] = 1;
  const auto out = largest_cc_3d(v);
  EXPECT_EQ(std::count(out.labels.begin(), out.labels.end(), 1), 5);
  EXPECT_EQ(out.labels[7], 0);
  EXPECT_EQ(count_components(v, 1), 2);
  EXPECT_EQ(count_components(out, 1), 1);
}

TEST(Components, DiagonalNeighboursConnect) {
  LabelVolume v({3, 3, 3}, {1, 1, 1}, 3);
  v.labels[v.index(0, 0, 0)] = 2;
  v.labels[v.index(1, 1, 1)] = 2;
  v.labels[v.index(2, 2, 2)] = 2;
  EXPECT_EQ(count_components(v, 2), 1);
  EXPECT_EQ(largest_cc_3d(v).labels, v.labels);
}

TEST(Components, TieKeepsFirstInMemoryOrder) {
  LabelVolume v({5, 1, 1}, {1, 1, 1}, 2);
  v.labels = {1, 0, 0, 0, 1};
  const auto out = largest_cc_3d(v);
  EXPECT_EQ(out.labels, (std::vector<std::int32_t>{1, 0, 0, 0, 0}));
}

TEST(Components, MatchesFloodFillAndIsIdempotent) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 30; ++rep) {
    const auto v = testing::random_label_volume(rng, {8, 7, 6}, 4, 0.12);
    const auto out = largest_cc_3d(v);
    EXPECT_EQ(out.labels, testing::flood_fill_largest_cc(v).labels);
    EXPECT_EQ(largest_cc_3d(out).labels, out.labels);
    for (int k = 1; k < 4; ++k) {
      EXPECT_LE(std::count(out.labels.begin(), out.labels.end(), k), std::count(v.labels.begin(), v.labels.end(), k));
      EXPECT_LE(count_components(out, k), 1);
    }
  }
}

TEST(Regions, EightSlicesSplitTwoFourTwo) {
  LabelVolume v({2, 2, 10}, {1, 1, 1}, 2);
  for (int z = 1; z < 9; ++z) v.labels[v.index(0, 0, z)] = 1;
  const auto r = region_split(v);
  ASSERT_TRUE(r.has_value());
  using R = Region;
  EXPECT_EQ(*r, (std::vector<R>{R::kOutside, R::kApical, R::kApical, R::kMid, R::kMid, R::kMid, R::kMid,
                                R::kBasal, R::kBasal, R::kOutside}));
}

TEST(Regions, SingleSliceIsApical) {
  LabelVolume v({2, 2, 3}, {1, 1, 1}, 2);
  v.labels[v.index(1, 1, 1)] = 1;
  const auto r = region_split(v);
  EXPECT_EQ((*r)[1], Region::kApical);
  EXPECT_EQ((*r)[0], Region::kOutside);
}

TEST(Regions, NoForegroundIsUndefined) {
  EXPECT_FALSE(region_split(LabelVolume({2, 2, 3}, {1, 1, 1}, 2)).has_value());
}

TEST(Regions, CoverEachForegroundSliceOnce) {
  for (int n = 2; n <= 12; ++n) {
    LabelVolume v({1, 1, n}, {1, 1, 1}, 2);
    for (int z = 0; z < n; ++z) v.labels[z] = 1;
    const auto r = *region_split(v);
    const int ap = static_cast<int>(std::count(r.begin(), r.end(), Region::kApical));
    const int ba = static_cast<int>(std::count(r.begin(), r.end(), Region::kBasal));
    const int q = (n + 3) / 4;
    EXPECT_EQ(ap, q);
    EXPECT_EQ(ba, std::min(q, n - q));
    EXPECT_EQ(std::count(r.begin(), r.end(), Region::kOutside), 0);
  }
}

}  // namespace
}  // namespace dmrseg::metrics
