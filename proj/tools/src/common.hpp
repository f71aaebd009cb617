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

#ifndef DMRSEG_TOOLS_COMMON_HPP
#define DMRSEG_TOOLS_COMMON_HPP

#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

namespace dmrseg::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Registration hooks; each adds a subcommand and its handler.
void add_synth(CLI::App& app);
void add_train(CLI::App& app);
void add_eval(CLI::App& app);
void add_predict(CLI::App& app);
void add_distmap(CLI::App& app);
void add_diag(CLI::App& app);

/// Worker count: hardware concurrency, capped by DMRSEG_THREADS when set.
int worker_threads();

void write_text(const std::string& path, const std::string& text);
void make_dirs(const std::string& dir);
/// Creates the parent directory of `path` if it has one.
void make_parent(const std::string& path);
std::string absolute(const std::string& path);

/// `key = value` lines in the given order, for the resolved-config artifact
/// of commands that have no RunConfig.
std::string kv_text(const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace dmrseg::tools

#endif  // DMRSEG_TOOLS_COMMON_HPP
