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

#ifndef DMRSEG_CONFIG_HPP
#define DMRSEG_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "dmrseg/kv.hpp"
#include "dmrseg/preprocess.hpp"
#include "dmrseg/trainer.hpp"

namespace dmrseg::cfg {

/// Everything a training run needs. Text form: flat `key = value` lines.
struct RunConfig {
  train::TrainConfig train;
  bool lr0_set = false;  // when unset, lr0 follows the task count
  std::string data;      // manifest
  std::string folds;     // fold file; generated from the manifest when empty
  int fold = 0;
  int num_folds = 5;
  std::string out = "run";
  prep::PreprocessConfig prep;
  int eval_batch = 8;
};

/// Applies one key; ParseError on unknown keys or malformed values.
void apply(RunConfig& rc, const kv::Entry& e);
/// `key=value` override as given on the command line.
void apply_override(RunConfig& rc, const std::string& assignment);

RunConfig parse(const std::string& text);
RunConfig load(const std::string& path);

/// Fills derived defaults (lr0 by task count) and validates.
void resolve(RunConfig& rc);

/// Every key in a fixed order; parse(resolved_text(rc)) reproduces rc.
std::string resolved_text(const RunConfig& rc);

/// FNV-1a of the resolved text without the output directory.
std::string config_hash(const RunConfig& rc);

}  // namespace dmrseg::cfg

#endif  // DMRSEG_CONFIG_HPP
