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

#ifndef DMRSEG_FOLDS_HPP
#define DMRSEG_FOLDS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dmrseg::io {

/// One line of a dataset manifest: `case_id, image_path, label_path, tag`.
/// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string case_id;
  std::string image_path;
  std::string label_path;
  std::string tag;
  bool operator==(const ManifestEntry&) const = default;
};

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& base_dir = {});
std::vector<ManifestEntry> read_manifest(const std::string& path);
std::string format_manifest(const std::vector<ManifestEntry>& entries);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

/// Cases that must stay on the same side of a split. "<name>_ED" and
/// "<name>_ES" share the group "<name>"; any other id is its own group.
std::string case_group(const std::string& case_id);

struct FoldCase {
  std::string id;
  std::string stratum;  // empty: a single stratum
};

/// Test-fold index per case, in input order. Groups are shuffled per stratum
/// with a seeded generator and dealt round-robin into k folds. Throws
/// SpecError when k < 2 or a stratum has fewer than k groups.
std::vector<int> split_folds(const std::vector<FoldCase>& cases, int k, std::uint64_t seed);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Test set = fold `test_fold`; the remaining groups of each stratum are split
/// 8:1 into train and validation (at least one validation group when a
/// stratum has two or more remaining groups).
FoldSplit fold_split(const std::vector<FoldCase>& cases, const std::vector<int>& folds,
                     int test_fold, std::uint64_t seed);

/// Fold file: `case_id, fold_index` per line.
std::string format_folds(const std::vector<FoldCase>& cases, const std::vector<int>& folds);
std::map<std::string, int> parse_folds(const std::string& text);
std::map<std::string, int> read_folds(const std::string& path);

}  // namespace dmrseg::io

#endif  // DMRSEG_FOLDS_HPP
