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

#include "dmrseg/error.hpp"
#include "dmrseg/nifti.hpp"
#include "dmrseg/phantom.hpp"

namespace dmrseg::phantom {
namespace {

int count_class(const LabelVolume& l, int cls) {
  return static_cast<int>(std::count(l.labels.begin(), l.labels.end(), cls));
}

TEST(Phantom, DefaultSpecIsValid) {
  PhantomSpec s;
  EXPECT_NO_THROW(s.validate());
  const auto [img, lab] = gen_phantom(s, 0, Phase::kED);
  EXPECT_EQ(img.dims, (std::array<int, 3>{64, 64, 10}));
  EXPECT_EQ(lab.dims, img.dims);
  EXPECT_EQ(lab.num_classes, kNumClasses);
  EXPECT_EQ(img.spacing, (Vec3{1.5625, 1.5625, 10.0}));
  EXPECT_NO_THROW(lab.validate());
}

TEST(Phantom, BrokenGeometryIsSpecError) {
  auto bad = [](auto mutate) {
    PhantomSpec s;
    mutate(s);
    return s;
  };
  EXPECT_THROW(bad([](PhantomSpec& s) { s.lv_radius_min = 10; }).validate(), SpecError);
  EXPECT_THROW(bad([](PhantomSpec& s) { s.myo_thickness_min = 0.5; s.myo_thickness_max = 1; }).validate(), SpecError);
  EXPECT_THROW(bad([](PhantomSpec& s) { s.empty_slices = 0; }).validate(), SpecError);
  EXPECT_THROW(bad([](PhantomSpec& s) { s.empty_slices = 10; }).validate(), SpecError);
  EXPECT_THROW(bad([](PhantomSpec& s) { s.lv_radius_max = 30; }).validate(), SpecError);
  EXPECT_THROW(bad([](PhantomSpec& s) { s.rv_scale_min = 0.4; }).validate(), SpecError);
  EXPECT_THROW(gen_phantom(bad([](PhantomSpec& s) { s.lv_radius_min = 10; }), 0, Phase::kED), SpecError);
}

TEST(Phantom, RingEnclosesDisk) {
  PhantomSpec s;
  for (int p = 0; p < 20; ++p) {
    for (auto phase : {Phase::kED, Phase::kES}) {
      const auto lab = gen_phantom(s, p, phase).second;
      for (int z = 0; z < lab.nz(); ++z) {
        const auto sl = lab.slice(z);
        for (int r = 0; r < sl.height; ++r)
          for (int c = 0; c < sl.width; ++c) {
            if (sl.at(r, c) != kLv) continue;
            ASSERT_TRUE(r > 0 && c > 0 && r < sl.height - 1 && c < sl.width - 1);
            for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
              const int v = sl.at(r + dr, c + dc);
              ASSERT_TRUE(v == kLv || v == kMyo) << "patient " << p << " slice " << z;
            }
          }
      }
    }
  }
}

TEST(Phantom, EmptySliceFractionMatchesSpec) {
  PhantomSpec s;
  s.empty_slices = 2;
  for (int p = 0; p < 10; ++p) {
    const auto lab = gen_phantom(s, p, Phase::kED).second;
    const auto empty = empty_slice_indices(s, p);
    ASSERT_EQ(empty.size(), 2u);
    int empty_count = 0;
    for (int z = 0; z < lab.nz(); ++z) {
      const auto sl = lab.slice(z);
      const bool none = std::all_of(sl.values.begin(), sl.values.end(), [](int v) { return v == 0; });
      const bool listed = std::find(empty.begin(), empty.end(), z) != empty.end();
      EXPECT_EQ(none, listed) << p << " " << z;
      empty_count += none;
    }
    EXPECT_EQ(empty_count, 2);
    // Empty slices sit at the volume ends.
    for (int z : empty) EXPECT_TRUE(z < 2 || z >= lab.nz() - 2);
  }
}

TEST(Phantom, SameSeedSameBytes) {
  PhantomSpec s;
  s.seed = 9;
  const auto a = gen_phantom(s, 3, Phase::kES);
  const auto b = gen_phantom(s, 3, Phase::kES);
  EXPECT_EQ(io::encode_nifti(a.first), io::encode_nifti(b.first));
  EXPECT_EQ(a.second.labels, b.second.labels);
  s.seed = 10;
  EXPECT_NE(gen_phantom(s, 3, Phase::kES).first.voxels, a.first.voxels);
}

TEST(Phantom, EndSystoleHasSmallerBloodPool) {
  PhantomSpec s;
  for (int p = 0; p < 5; ++p) {
    const auto ed = gen_phantom(s, p, Phase::kED).second;
    const auto es = gen_phantom(s, p, Phase::kES).second;
    EXPECT_LT(count_class(es, kLv), count_class(ed, kLv));
    // Myocardial area is conserved up to rasterisation.
    EXPECT_NEAR(count_class(es, kMyo), count_class(ed, kMyo), 0.15 * count_class(ed, kMyo));
    EXPECT_GT(count_class(ed, kRv), 0);
  }
}

TEST(Phantom, ClassesAreBrighterThanBackground) {
  PhantomSpec s;
  s.noise_sigma = 0;
  s.distractors = false;
  const auto [img, lab] = gen_phantom(s, 1, Phase::kED);
  double lv = 0, bg = 0;
  int nl = 0, nb = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (lab.labels[i] == kLv) lv += img.voxels[i], ++nl;
    if (lab.labels[i] == 0) bg += img.voxels[i], ++nb;
  }
  EXPECT_GT(lv / nl, bg / nb + 0.3);
}

TEST(Phantom, SpecTextRoundTrip) {
  PhantomSpec s;
  s.height = 48;
  s.noise_sigma = 0.125;
  s.distractors = false;
  s.seed = 77;
  const auto back = parse_spec(format_spec(s));
  EXPECT_EQ(format_spec(back), format_spec(s));
  EXPECT_EQ(back.height, 48);
  EXPECT_FALSE(back.distractors);
  EXPECT_THROW(parse_spec("radius = 3\n"), ParseError);
}

}  // namespace
}  // namespace dmrseg::phantom
