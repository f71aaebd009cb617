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

#include "dmrseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "dmrseg/error.hpp"

namespace dmrseg::ckpt {
namespace {

constexpr char kMagic[8] = {'D', 'M', 'R', 'S', 'E', 'G', 'C', 'K'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t pos() const { return pos_; }
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                       std::to_string(pos_));
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
void write_group(Writer& w, const nets::ParamGroup<T>& g) {
  auto emit = [&](const nets::NamedTensor<T>& nt, std::uint8_t kind) {
    w.u8(kind);
    w.str(g.prefix() + "." + nt.name);
    w.u32(static_cast<std::uint32_t>(nt.tensor.ndim()));
    for (int e : nt.tensor.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (T v : nt.tensor.data()) w.f32(static_cast<float>(v));
  };
  for (const auto& p : g.params()) emit(p, 0);
  for (const auto& b : g.buffers()) emit(b, 1);
}

}  // namespace

std::string arch_to_text(const nets::ArchSpec& s) {
  std::ostringstream os;
  os << "variant=" << nets::variant_name(s.variant) << '\n'
     << "in_channels=" << s.in_channels << '\n'
     << "num_classes=" << s.num_classes << '\n'
     << "stage_channels=";
  for (std::size_t i = 0; i < s.stage_channels.size(); ++i) {
    os << (i ? "," : "") << s.stage_channels[i];
  }
  os << '\n'
     << "bottleneck_channels=" << s.bottleneck_channels << '\n'
     << "batchnorm=" << (s.use_batchnorm ? 1 : 0) << '\n'
     << "dmr_attached=" << (s.dmr_attached ? 1 : 0) << '\n'
     << "dm_threshold=" << fmt_double(s.dm_threshold) << '\n';
  return os.str();
}

nets::ArchSpec arch_from_text(const std::string& text) {
  const auto kv = parse_kv(text);
  nets::ArchSpec s;
  auto get = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ParseError(std::string("checkpoint header lacks '") + k + "'");
    return it->second;
  };
  try {
    s.variant = nets::parse_variant(get("variant"));
    s.in_channels = std::stoi(get("in_channels"));
    s.num_classes = std::stoi(get("num_classes"));
    s.stage_channels.clear();
    std::istringstream ch(get("stage_channels"));
    std::string tok;
    while (std::getline(ch, tok, ',')) s.stage_channels.push_back(std::stoi(tok));
    s.bottleneck_channels = std::stoi(get("bottleneck_channels"));
    s.use_batchnorm = get("batchnorm") == "1";
    s.dmr_attached = get("dmr_attached") == "1";
    s.dm_threshold = std::stod(get("dm_threshold"));
  } catch (const std::logic_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  return s;
}

template <typename T>
std::vector<std::uint8_t> encode(const Checkpoint<T>& ck) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  std::string header = arch_to_text(ck.params.spec);
  header += "epoch=" + std::to_string(ck.meta.epoch) + '\n';
  header += "val_dice=" + fmt_double(ck.meta.val_dice) + '\n';
  header += "config_hash=" + ck.meta.config_hash + '\n';
  w.str(header);
  std::uint32_t entries = 0;
  for (const auto* g : ck.params.groups()) {
    entries += static_cast<std::uint32_t>(g->params().size() + g->buffers().size());
  }
  if (ck.task) entries += 2;
  w.u32(entries);
  for (const auto* g : ck.params.groups()) write_group(w, *g);
  if (ck.task) {
    for (const auto& [name, v] : {std::pair{"mtl.s1", ck.task->s1}, std::pair{"mtl.s2", ck.task->s2}}) {
      w.u8(0);
      w.str(name);
      w.u32(1);
      w.u32(1);
      w.f32(static_cast<float>(v));
    }
  }
  return w.take();
}

template <typename T>
Checkpoint<T> decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError("not a dmrseg checkpoint (bad magic at byte 0)");
  }
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kFormatVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " at byte 8");
  }
  const std::string header = r.str("header");
  nets::ArchSpec spec = arch_from_text(header);
  const auto kv = parse_kv(header);
  Checkpoint<T> ck;
  try {
    if (kv.count("epoch")) ck.meta.epoch = std::stoi(kv.at("epoch"));
    if (kv.count("val_dice")) ck.meta.val_dice = std::stod(kv.at("val_dice"));
  } catch (const std::logic_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  if (kv.count("config_hash")) ck.meta.config_hash = kv.at("config_hash");

  struct Entry {
    std::uint8_t kind;
    autograd::Shape shape;
    std::vector<T> values;
  };
  std::map<std::string, Entry> entries;
  const std::uint32_t n = r.u32("entry count");
  for (std::uint32_t i = 0; i < n; ++i) {
    Entry e;
    e.kind = r.u8("entry kind");
    const std::string name = r.str("entry name");
    const std::uint32_t nd = r.u32("entry rank");
    if (nd > 8) throw ParseError("entry '" + name + "' has rank " + std::to_string(nd));
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < nd; ++d) {
      e.shape.push_back(static_cast<int>(r.u32("entry extent")));
      numel *= static_cast<std::size_t>(e.shape.back());
      if (numel > bytes.size()) r.need(bytes.size() + 1, "entry payload");
    }
    r.need(numel * 4, "entry payload");
    e.values.resize(numel);
    for (auto& v : e.values) v = static_cast<T>(r.f32("entry payload"));
    entries.emplace(name, std::move(e));
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint at byte " + std::to_string(r.pos()));

  const bool has_dmr = std::any_of(entries.begin(), entries.end(), [](const auto& kv) {
    return kv.first.rfind("dmr_decoder.", 0) == 0;
  });
  if (has_dmr != spec.dmr_attached) {
    throw ParseError("checkpoint header dmr_attached disagrees with its entries");
  }
  // Build the skeleton, then overwrite every tensor by name.
  ck.params = nets::build_model<T>(spec, 0);
  std::size_t used = 0;
  for (auto* g : ck.params.groups()) {
    auto fill = [&](nets::NamedTensor<T>& nt, std::uint8_t kind) {
      const std::string full = g->prefix() + "." + nt.name;
      auto it = entries.find(full);
      if (it == entries.end() || it->second.kind != kind) {
        throw ParseError("checkpoint is missing '" + full + "'");
      }
      if (it->second.shape != nt.tensor.shape()) {
        throw ParseError("checkpoint entry '" + full + "' has shape " +
                         autograd::shape_str(it->second.shape) + ", expected " +
                         autograd::shape_str(nt.tensor.shape()));
      }
      std::copy(it->second.values.begin(), it->second.values.end(), nt.tensor.data().begin());
      ++used;
    };
    for (auto& p : g->params()) fill(p, 0);
    for (auto& b : g->buffers()) fill(b, 1);
  }
  auto s1 = entries.find("mtl.s1"), s2 = entries.find("mtl.s2");
  if (s1 != entries.end() && s2 != entries.end()) {
    ck.task = TaskScales{static_cast<double>(s1->second.values.at(0)),
                         static_cast<double>(s2->second.values.at(0))};
    used += 2;
  }
  if (used != entries.size()) throw ParseError("checkpoint has entries the architecture does not use");
  return ck;
}

template <typename T>
void save(const std::string& path, const Checkpoint<T>& ck) {
  const auto bytes = encode(ck);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for '" + path + "'");
}

template <typename T>
Checkpoint<T> load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return decode<T>(bytes);
}

template <typename T>
Checkpoint<T> finalize(const Checkpoint<T>& ck) {
  if (!ck.params.dmr_decoder) return Checkpoint<T>{ck.params.clone(), ck.meta, ck.task};
  return Checkpoint<T>{nets::detach_regularizer(ck.params), ck.meta, std::nullopt};
}

#define DMRSEG_INSTANTIATE_CKPT(T)                                          \
  template std::vector<std::uint8_t> encode<T>(const Checkpoint<T>&);       \
  template Checkpoint<T> decode<T>(std::span<const std::uint8_t>);          \
  template void save<T>(const std::string&, const Checkpoint<T>&);          \
  template Checkpoint<T> load<T>(const std::string&);                       \
  template Checkpoint<T> finalize<T>(const Checkpoint<T>&);

DMRSEG_INSTANTIATE_CKPT(float)
DMRSEG_INSTANTIATE_CKPT(double)

}  // namespace dmrseg::ckpt
