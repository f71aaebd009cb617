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

#ifndef DMRSEG_KV_HPP
#define DMRSEG_KV_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dmrseg::kv {

// Flat `key = value` text. '#' starts a comment anywhere on a line.
struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

/// ParseError on a line without '=' or with an empty key, or a repeated key.
std::vector<Entry> parse(const std::string& text);
std::string read_file(const std::string& path);

// Value conversions; ParseError naming the key on malformed input.
bool to_bool(const Entry& e);
int to_int(const Entry& e);
std::uint64_t to_u64(const Entry& e);
double to_double(const Entry& e);
std::vector<int> to_int_list(const Entry& e);  // comma separated

/// Shortest round-trip text for a double.
std::string format_double(double v);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace dmrseg::kv

#endif  // DMRSEG_KV_HPP
