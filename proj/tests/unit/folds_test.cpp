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

#include <filesystem>
#include <map>
#include <set>

#include "dmrseg/error.hpp"
#include "dmrseg/folds.hpp"

namespace dmrseg::io {
namespace {

std::vector<FoldCase> stratified(int strata, int per, bool paired) {
  std::vector<FoldCase> out;
  for (int s = 0; s < strata; ++s)
    for (int i = 0; i < per; ++i) {
      const std::string base = "s" + std::to_string(s) + "c" + std::to_string(i);
      const std::string tag = "g" + std::to_string(s);
      if (paired) {
        out.push_back({base + "_ED", tag});
        out.push_back({base + "_ES", tag});
      } else {
        out.push_back({base, tag});
      }
    }
  return out;
}

TEST(Manifest, ParseCommentsTagsAndPaths) {
  const std::string text =
      "# id, image, label, tag\n"
      "a_ED, img/a.nii, lab/a.nii, DCM\n"
      "\n"
      "b_ED,/abs/b.nii,/abs/b_l.nii\n";
  const auto m = parse_manifest(text, "/data");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (ManifestEntry{"a_ED", "/data/img/a.nii", "/data/lab/a.nii", "DCM"}));
  EXPECT_EQ(m[1].image_path, "/abs/b.nii");
  EXPECT_EQ(m[1].tag, "");
}

TEST(Manifest, Errors) {
  EXPECT_THROW(parse_manifest("a, b\n"), ParseError);
  EXPECT_THROW(parse_manifest("a, x, y, t\na, z, w, t\n"), ParseError);
}

TEST(Manifest, FormatRoundTrip) {
  const std::vector<ManifestEntry> m{{"a", "/x/a.nii", "/x/la.nii", "t1"}, {"b", "/x/b.nii", "/x/lb.nii", ""}};
  EXPECT_EQ(parse_manifest(format_manifest(m)), m);
  const auto dir = std::filesystem::temp_directory_path() / "dmrseg_manifest_test";
  std::filesystem::create_directories(dir);
  write_manifest((dir / "m.csv").string(), m);
  EXPECT_EQ(read_manifest((dir / "m.csv").string()), m);
  std::filesystem::remove_all(dir);
}

TEST(Groups, PhasesShareAGroup) {
  EXPECT_EQ(case_group("patient001_ED"), "patient001");
  EXPECT_EQ(case_group("patient001_ES"), "patient001");
  EXPECT_EQ(case_group("patient001"), "patient001");
  EXPECT_EQ(case_group("x_EDX"), "x_EDX");
}

TEST(SplitFolds, PartitionAndStratification) {
  const auto cases = stratified(5, 20, false);
  const auto folds = split_folds(cases, 5, 42);
  ASSERT_EQ(folds.size(), cases.size());
  std::map<std::pair<int, std::string>, int> count;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    ASSERT_GE(folds[i], 0);
    ASSERT_LT(folds[i], 5);
    ++count[{folds[i], cases[i].stratum}];
  }
  EXPECT_EQ(count.size(), 25u);
  for (const auto& [key, n] : count) EXPECT_EQ(n, 4) << key.first << " " << key.second;
}

TEST(SplitFolds, DeterministicAndSeedSensitive) {
  const auto cases = stratified(2, 10, true);
  EXPECT_EQ(split_folds(cases, 5, 7), split_folds(cases, 5, 7));
  EXPECT_NE(split_folds(cases, 5, 7), split_folds(cases, 5, 8));
}

TEST(SplitFolds, PhasesStayTogether) {
  const auto cases = stratified(1, 12, true);
  const auto folds = split_folds(cases, 4, 1);
  for (std::size_t i = 0; i < cases.size(); i += 2) EXPECT_EQ(folds[i], folds[i + 1]);
}

TEST(SplitFolds, Errors) {
  EXPECT_THROW(split_folds(stratified(1, 10, false), 1, 0), SpecError);
  EXPECT_THROW(split_folds(stratified(2, 3, false), 5, 0), SpecError);
}

TEST(FoldSplit, DisjointCoverWithEightToOneRatio) {
  const auto cases = stratified(1, 50, true);
  const auto folds = split_folds(cases, 5, 3);
  for (int t = 0; t < 5; ++t) {
    const auto s = fold_split(cases, folds, t, 3);
    std::set<std::size_t> all;
    for (auto v : {&s.train, &s.val, &s.test})
      for (auto i : *v) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), cases.size());
    for (auto i : s.test) EXPECT_EQ(folds[i], t);
    // 40 remaining groups: 36 train, 4 val (80 / 8 cases).
    EXPECT_EQ(s.val.size(), 8u);
    EXPECT_EQ(s.train.size(), 72u);
    std::set<std::string> train_groups, val_groups;
    for (auto i : s.train) train_groups.insert(case_group(cases[i].id));
    for (auto i : s.val) EXPECT_FALSE(train_groups.count(case_group(cases[i].id)));
  }
  EXPECT_EQ(fold_split(cases, folds, 2, 3).val, fold_split(cases, folds, 2, 3).val);
}

TEST(FoldSplit, SmallStratumStillGetsValidation) {
  const auto cases = stratified(1, 3, false);
  const auto folds = split_folds(cases, 3, 0);
  const auto s = fold_split(cases, folds, 0, 0);
  EXPECT_EQ(s.test.size(), 1u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.train.size(), 1u);
}

TEST(FoldFile, RoundTripAndErrors) {
  const auto cases = stratified(1, 5, false);
  const auto folds = split_folds(cases, 5, 0);
  const auto back = parse_folds(format_folds(cases, folds));
  ASSERT_EQ(back.size(), cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) EXPECT_EQ(back.at(cases[i].id), folds[i]);
  EXPECT_THROW(parse_folds("a, x\n"), ParseError);
  EXPECT_THROW(parse_folds("a\n"), ParseError);
  EXPECT_THROW(parse_folds("a, 1\na, 2\n"), ParseError);
}

}  // namespace
}  // namespace dmrseg::io
