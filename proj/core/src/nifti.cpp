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

#include "dmrseg/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dmrseg/error.hpp"

namespace dmrseg::io {
namespace {

// Byte offsets of the header fields this subset reads or writes.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffMagic = 344;

std::uint32_t bswap32(std::uint32_t v) { return __builtin_bswap32(v); }
std::uint16_t bswap16(std::uint16_t v) { return __builtin_bswap16(v); }

class HeaderView {
 public:
  HeaderView(std::span<const std::uint8_t> b, bool swap) : b_(b), swap_(swap) {}

  std::uint32_t raw32(std::size_t off) const {
    std::uint32_t v;
    std::memcpy(&v, b_.data() + off, 4);
    return swap_ ? bswap32(v) : v;
  }
  std::int32_t i32(std::size_t off) const { return static_cast<std::int32_t>(raw32(off)); }
  std::int16_t i16(std::size_t off) const {
    std::uint16_t v;
    std::memcpy(&v, b_.data() + off, 2);
    return static_cast<std::int16_t>(swap_ ? bswap16(v) : v);
  }
  float f32(std::size_t off) const { return std::bit_cast<float>(raw32(off)); }

 private:
  std::span<const std::uint8_t> b_;
  bool swap_;
};

[[noreturn]] void fail(const std::string& field, std::size_t offset, const std::string& why) {
  throw ParseError("NIfTI " + field + " (byte " + std::to_string(offset) + "): " + why);
}

class Emitter {
 public:
  explicit Emitter(std::size_t n) : b_(n, 0) {}
  void i32(std::size_t off, std::int32_t v) { put(off, std::bit_cast<std::uint32_t>(v)); }
  void i16(std::size_t off, std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    b_[off] = static_cast<std::uint8_t>(u);
    b_[off + 1] = static_cast<std::uint8_t>(u >> 8);
  }
  void f32(std::size_t off, float v) { put(off, std::bit_cast<std::uint32_t>(v)); }
  void u8(std::size_t off, std::uint8_t v) { b_[off] = v; }
  std::vector<std::uint8_t>& bytes() { return b_; }

 private:
  void put(std::size_t off, std::uint32_t u) {
    for (int i = 0; i < 4; ++i) b_[off + i] = static_cast<std::uint8_t>(u >> (8 * i));
  }
  std::vector<std::uint8_t> b_;
};

}  // namespace

Volume decode_nifti(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
    fail("header", 0, "file has " + std::to_string(bytes.size()) + " bytes, need 348");
  }
  std::uint32_t raw;
  std::memcpy(&raw, bytes.data(), 4);
  const bool host_le = std::endian::native == std::endian::little;
  const std::uint32_t le = host_le ? raw : bswap32(raw);
  const std::uint32_t be = host_le ? bswap32(raw) : raw;
  bool swap;
  if (le == static_cast<std::uint32_t>(kHeaderSize)) {
    swap = !host_le;
  } else if (be == static_cast<std::uint32_t>(kHeaderSize)) {
    swap = host_le;
  } else {
    fail("sizeof_hdr", kOffSizeofHdr, "expected 348 in either byte order");
  }
  const HeaderView h(bytes, swap);

  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
    fail("magic", kOffMagic, "expected single-file \"n+1\"");
  }

  const int ndim = h.i16(kOffDim);
  if (ndim < 1 || ndim > 4) fail("dim[0]", kOffDim, "rank " + std::to_string(ndim) + " unsupported");
  std::array<int, 3> dims{1, 1, 1};
  for (int i = 1; i <= ndim; ++i) {
    const int e = h.i16(kOffDim + 2 * i);
    if (e < 1) fail("dim[" + std::to_string(i) + "]", kOffDim + 2 * i, "extent must be >= 1");
    if (i <= 3) dims[i - 1] = e;
    if (i == 4 && e != 1) fail("dim[4]", kOffDim + 8, "time extent must be 1");
  }

  const int dtype = h.i16(kOffDatatype);
  int width;
  switch (dtype) {
    case kDtUint8: width = 1; break;
    case kDtInt16: width = 2; break;
    case kDtFloat32: width = 4; break;
    default: fail("datatype", kOffDatatype, "code " + std::to_string(dtype) + " unsupported");
  }
  if (h.i16(kOffBitpix) != 8 * width) {
    fail("bitpix", kOffBitpix, "does not match datatype " + std::to_string(dtype));
  }

  Vec3 spacing{1.0, 1.0, 1.0};
  for (int i = 1; i <= 3; ++i) {
    const double p = h.f32(kOffPixdim + 4 * i);
    if (i <= ndim) {
      if (!(p > 0) || !std::isfinite(p)) {
        fail("pixdim[" + std::to_string(i) + "]", kOffPixdim + 4 * i, "spacing must be positive");
      }
      spacing[i - 1] = p;
    } else if (p > 0 && std::isfinite(p)) {
      spacing[i - 1] = p;
    }
  }

  const float vox = h.f32(kOffVoxOffset);
  if (!(vox >= static_cast<float>(kVoxOffset)) || vox != std::floor(vox)) {
    fail("vox_offset", kOffVoxOffset, "must be an integer >= 352");
  }
  const std::size_t start = static_cast<std::size_t>(vox);
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  const std::size_t end = start + n * width;
  if (bytes.size() < end) {
    fail("payload", bytes.size(),
         "truncated: " + std::to_string(n) + " voxels need bytes " + std::to_string(start) +
             ".." + std::to_string(end));
  }

  const double slope = h.f32(kOffSclSlope);
  const double inter = h.f32(kOffSclInter);
  const bool scaled = slope != 0.0 && std::isfinite(slope);

  Volume vol(dims, spacing);
  if (h.i16(kOffQformCode) > 0) {
    for (int i = 0; i < 3; ++i) vol.origin[i] = h.f32(kOffQoffset + 4 * i);
  }
  const HeaderView payload(bytes, swap);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = start + i * width;
    double v = 0;
    switch (dtype) {
      case kDtUint8: v = bytes[off]; break;
      case kDtInt16: v = payload.i16(off); break;
      case kDtFloat32: v = payload.f32(off); break;
    }
    vol.voxels[i] = scaled ? slope * v + (std::isfinite(inter) ? inter : 0.0) : v;
  }
  return vol;
}

std::vector<std::uint8_t> encode_nifti(const Volume& vol) {
  const std::size_t n = vol.size();
  Emitter e(kVoxOffset + 4 * n);
  e.i32(kOffSizeofHdr, kHeaderSize);
  e.i16(kOffDim, 3);
  for (int i = 0; i < 3; ++i) e.i16(kOffDim + 2 * (i + 1), static_cast<std::int16_t>(vol.dims[i]));
  for (int i = 4; i <= 7; ++i) e.i16(kOffDim + 2 * i, 1);
  e.i16(kOffDatatype, kDtFloat32);
  e.i16(kOffBitpix, 32);
  e.f32(kOffPixdim, 1.0f);  // qfac
  for (int i = 0; i < 3; ++i) e.f32(kOffPixdim + 4 * (i + 1), static_cast<float>(vol.spacing[i]));
  e.f32(kOffVoxOffset, static_cast<float>(kVoxOffset));
  e.f32(kOffSclSlope, 0.0f);
  e.f32(kOffSclInter, 0.0f);
  e.u8(kOffXyztUnits, 2);  // mm
  e.i16(kOffQformCode, 1);
  for (int i = 0; i < 3; ++i) e.f32(kOffQoffset + 4 * i, static_cast<float>(vol.origin[i]));
  std::memcpy(e.bytes().data() + kOffMagic, "n+1\0", 4);
  for (std::size_t i = 0; i < n; ++i) {
    e.f32(kVoxOffset + 4 * i, static_cast<float>(vol.voxels[i]));
  }
  return std::move(e.bytes());
}

Volume read_nifti(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_nifti(bytes);
  } catch (const ParseError& err) {
    throw ParseError(path + ": " + err.what());
  }
}

LabelVolume to_labels(const Volume& vol, int num_classes) {
  LabelVolume lab(vol.dims, vol.spacing, num_classes);
  lab.origin = vol.origin;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const double v = vol.voxels[i];
    if (v != std::round(v) || v < 0 || v >= num_classes) {
      throw LabelError("voxel " + std::to_string(i) + " holds " + std::to_string(v) +
                       ", not a class id below " + std::to_string(num_classes));
    }
    lab.labels[i] = static_cast<std::int32_t>(v);
  }
  return lab;
}

Volume to_volume(const LabelVolume& labels) {
  Volume vol(labels.dims, labels.spacing);
  vol.origin = labels.origin;
  std::copy(labels.labels.begin(), labels.labels.end(), vol.voxels.begin());
  return vol;
}

LabelVolume read_nifti_labels(const std::string& path, int num_classes) {
  return to_labels(read_nifti(path), num_classes);
}

void write_nifti(const Volume& vol, const std::string& path) {
  const auto bytes = encode_nifti(vol);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for '" + path + "'");
}

void write_nifti(const LabelVolume& labels, const std::string& path) {
  write_nifti(to_volume(labels), path);
}

}  // namespace dmrseg::io
