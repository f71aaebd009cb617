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

#include "dmrseg/folds.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "dmrseg/error.hpp"

namespace dmrseg::io {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool skip_line(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const std::string& p, const std::string& base) {
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base) / p).string();
}

struct Group {
  std::string name;
  std::string stratum;
  std::vector<std::size_t> members;
};

std::vector<Group> make_groups(const std::vector<FoldCase>& cases) {
  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string g = case_group(cases[i].id);
    auto [it, fresh] = index.emplace(g, groups.size());
    if (fresh) groups.push_back({g, cases[i].stratum, {}});
    Group& grp = groups[it->second];
    if (grp.stratum != cases[i].stratum) {
      throw SpecError("cases of group '" + g + "' carry different strata");
    }
    grp.members.push_back(i);
  }
  return groups;
}

// Group indices per stratum, strata in sorted order, groups in input order.
std::map<std::string, std::vector<std::size_t>> by_stratum(const std::vector<Group>& groups) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t g = 0; g < groups.size(); ++g) out[groups[g].stratum].push_back(g);
  return out;
}

std::uint64_t stratum_seed(std::uint64_t seed, const std::string& stratum, std::uint64_t salt) {
  std::uint64_t h = 14695981039346656037ull ^ salt;
  for (unsigned char c : stratum) h = (h ^ c) * 1099511628211ull;
  return seed ^ h;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& base_dir) {
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto f = split_commas(line);
    if (f.size() == 3) f.emplace_back();
    if (f.size() != 4 || f[0].empty() || f[1].empty()) {
      throw ParseError("manifest line " + std::to_string(lineno) +
                       ": expected case_id, image_path, label_path, tag");
    }
    if (!seen.insert(f[0]).second) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": duplicate case id " + f[0]);
    }
    out.push_back({f[0], resolve(f[1], base_dir), resolve(f[2], base_dir), f[3]});
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  return parse_manifest(read_text(path), std::filesystem::path(path).parent_path().string());
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.case_id + ", " + e.image_path + ", " + e.label_path + ", " + e.tag + "\n";
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << format_manifest(entries);
  if (!out) throw IoError("write failed: " + path);
}

std::string case_group(const std::string& case_id) {
  const auto n = case_id.size();
  if (n > 3 && case_id[n - 3] == '_') {
    const std::string suffix = case_id.substr(n - 2);
    if (suffix == "ED" || suffix == "ES") return case_id.substr(0, n - 3);
  }
  return case_id;
}

std::vector<int> split_folds(const std::vector<FoldCase>& cases, int k, std::uint64_t seed) {
  if (k < 2) throw SpecError("split_folds: k must be at least 2");
  const auto groups = make_groups(cases);
  std::vector<int> folds(cases.size(), -1);
  for (auto& [stratum, members] : by_stratum(groups)) {
    if (static_cast<int>(members.size()) < k) {
      throw SpecError("stratum '" + stratum + "' has " + std::to_string(members.size()) +
                      " groups, fewer than k = " + std::to_string(k));
    }
    std::vector<std::size_t> order = members;
    std::mt19937_64 rng(stratum_seed(seed, stratum, 0));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t c : groups[order[i]].members) folds[c] = static_cast<int>(i % k);
    }
  }
  return folds;
}

FoldSplit fold_split(const std::vector<FoldCase>& cases, const std::vector<int>& folds,
                     int test_fold, std::uint64_t seed) {
  if (folds.size() != cases.size()) throw UsageError("fold_split: one fold index per case");
  const auto groups = make_groups(cases);
  FoldSplit split;
  for (auto& [stratum, members] : by_stratum(groups)) {
    std::vector<std::size_t> rest;
    for (std::size_t g : members) {
      const int f = folds[groups[g].members.front()];
      if (f == test_fold) {
        for (std::size_t c : groups[g].members) split.test.push_back(c);
      } else {
        rest.push_back(g);
      }
    }
    std::mt19937_64 rng(stratum_seed(seed, stratum, 0x5A1ull + static_cast<std::uint64_t>(test_fold)));
    std::shuffle(rest.begin(), rest.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::lround(rest.size() / 9.0));
    if (n_val == 0 && rest.size() >= 2) n_val = 1;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      auto& dst = i < n_val ? split.val : split.train;
      for (std::size_t c : groups[rest[i]].members) dst.push_back(c);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string format_folds(const std::vector<FoldCase>& cases, const std::vector<int>& folds) {
  if (folds.size() != cases.size()) throw UsageError("format_folds: one fold index per case");
  std::string out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out += cases[i].id + ", " + std::to_string(folds[i]) + "\n";
  }
  return out;
}

std::map<std::string, int> parse_folds(const std::string& text) {
  std::map<std::string, int> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_commas(line);
    int fold = -1;
    try {
      if (f.size() == 2) fold = std::stoi(f[1]);
    } catch (const std::exception&) {
    }
    if (f.size() != 2 || f[0].empty() || fold < 0) {
      throw ParseError("fold file line " + std::to_string(lineno) + ": expected case_id, fold_index");
    }
    if (!out.emplace(f[0], fold).second) {
      throw ParseError("fold file line " + std::to_string(lineno) + ": duplicate case id " + f[0]);
    }
  }
  return out;
}

std::map<std::string, int> read_folds(const std::string& path) { return parse_folds(read_text(path)); }

}  // namespace dmrseg::io
