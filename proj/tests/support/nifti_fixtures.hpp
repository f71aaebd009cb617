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

#ifndef DMRSEG_TESTS_NIFTI_FIXTURES_HPP
#define DMRSEG_TESTS_NIFTI_FIXTURES_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "dmrseg/nifti.hpp"

namespace dmrseg::testing {

/// Hand-assembled NIfTI-1 file, independent of the library's encoder.
struct NiftiBuilder {
  int dims[3] = {3, 2, 2};
  float pixdim[3] = {1.25f, 1.5f, 8.0f};
  int datatype = io::kDtInt16;
  bool big_endian = false;

  int width() const { return datatype == io::kDtUint8 ? 1 : datatype == io::kDtInt16 ? 2 : 4; }
  std::size_t count() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }

  std::vector<std::uint8_t> build(const std::vector<double>& values) const {
    std::vector<std::uint8_t> b(352 + count() * width(), 0);
    auto put = [&](std::size_t off, const void* src, int n) {
      const auto* s = static_cast<const std::uint8_t*>(src);
      for (int i = 0; i < n; ++i) b[off + i] = s[big_endian ? n - 1 - i : i];
    };
    auto i32 = [&](std::size_t off, std::int32_t v) { put(off, &v, 4); };
    auto i16 = [&](std::size_t off, std::int16_t v) { put(off, &v, 2); };
    auto f32 = [&](std::size_t off, float v) { put(off, &v, 4); };
    i32(0, 348);
    i16(40, 3);
    for (int i = 0; i < 3; ++i) i16(42 + 2 * i, static_cast<std::int16_t>(dims[i]));
    i16(70, static_cast<std::int16_t>(datatype));
    i16(72, static_cast<std::int16_t>(8 * width()));
    f32(76, 1.0f);
    for (int i = 0; i < 3; ++i) f32(80 + 4 * i, pixdim[i]);
    f32(108, 352.0f);
    std::memcpy(b.data() + 344, "n+1\0", 4);
    for (std::size_t i = 0; i < count(); ++i) {
      const std::size_t off = 352 + i * width();
      if (datatype == io::kDtUint8) b[off] = static_cast<std::uint8_t>(values[i]);
      else if (datatype == io::kDtInt16) i16(off, static_cast<std::int16_t>(values[i]));
      else f32(off, static_cast<float>(values[i]));
    }
    return b;
  }
};

/// Five corrupted variants of a valid file, by name.
inline std::vector<std::pair<std::string, std::vector<std::uint8_t>>> corrupted_nifti_fixtures() {
  NiftiBuilder nb;
  const std::vector<double> values(nb.count(), 7.0);
  const auto good = nb.build(values);
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  auto bad = good;
  std::memcpy(bad.data() + 344, "ni1\0", 4);
  out.emplace_back("bad magic", bad);
  bad = good;
  bad[0] = 0x5A;  // 346
  bad[1] = 0x01;
  out.emplace_back("bad sizeof_hdr", bad);
  bad = good;
  bad[70] = 64;  // float64
  bad[72] = 64;
  out.emplace_back("unsupported datatype", bad);
  out.emplace_back("truncated payload", std::vector<std::uint8_t>(good.begin(), good.end() - 3));
  bad = good;
  bad[40] = 9;  // dim[0] = 9
  out.emplace_back("bad dim", bad);
  return out;
}

}  // namespace dmrseg::testing

#endif  // DMRSEG_TESTS_NIFTI_FIXTURES_HPP
