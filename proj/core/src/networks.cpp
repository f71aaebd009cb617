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

#include "dmrseg/networks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dmrseg/error.hpp"

namespace dmrseg::nets {
namespace ag = dmrseg::autograd;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kSegNet: return "segnet";
    case Variant::kUSegNet: return "usegnet";
    case Variant::kUNet: return "unet";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "segnet") return Variant::kSegNet;
  if (name == "usegnet") return Variant::kUSegNet;
  if (name == "unet") return Variant::kUNet;
  throw SpecError("unknown architecture variant '" + name + "'");
}

void ArchSpec::validate() const {
  if (in_channels < 1) throw SpecError("in_channels must be >= 1");
  if (num_classes < 2) throw SpecError("num_classes must be >= 2");
  if (stage_channels.size() != 3) throw SpecError("exactly 3 pooling stages are supported");
  int prev = 0;
  for (int c : stage_channels) {
    if (c <= prev) throw SpecError("stage_channels must be strictly increasing and positive");
    prev = c;
  }
  if (bottleneck_channels <= prev) {
    throw SpecError("bottleneck_channels must exceed the last stage width");
  }
  if (!(dm_threshold > 0)) throw SpecError("dm_threshold must be positive");
}

double kaiming_bound(int fan_in) { return std::sqrt(2.0) * std::sqrt(3.0 / fan_in); }

// ---------------------------------------------------------------------------
// ParamGroup

template <typename T>
void ParamGroup<T>::add_param(const std::string& name, Tensor<T> t) {
  t.set_requires_grad(true);
  params_.push_back({name, std::move(t)});
}

template <typename T>
void ParamGroup<T>::add_buffer(const std::string& name, Tensor<T> t) {
  buffers_.push_back({name, std::move(t)});
}

template <typename T>
Tensor<T>& ParamGroup<T>::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p.tensor;
  throw UsageError("no parameter '" + prefix_ + "." + name + "'");
}

template <typename T>
const Tensor<T>& ParamGroup<T>::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw UsageError("no parameter '" + prefix_ + "." + name + "'");
}

template <typename T>
Tensor<T>& ParamGroup<T>::buffer(const std::string& name) {
  for (auto& b : buffers_)
    if (b.name == name) return b.tensor;
  throw UsageError("no buffer '" + prefix_ + "." + name + "'");
}

template <typename T>
bool ParamGroup<T>::has_param(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const auto& p) { return p.name == name; });
}

template <typename T>
std::size_t ParamGroup<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
ParamGroup<T> ParamGroup<T>::clone() const {
  ParamGroup out(prefix_);
  for (const auto& p : params_) out.add_param(p.name, p.tensor.clone());
  for (const auto& b : buffers_) out.add_buffer(b.name, b.tensor.clone());
  return out;
}

// ---------------------------------------------------------------------------
// ModelParams

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = encoder.count() + seg_decoder.count();
  if (dmr_decoder) n += dmr_decoder->count();
  return n;
}

template <typename T>
std::vector<const ParamGroup<T>*> ModelParams<T>::groups() const {
  std::vector<const ParamGroup<T>*> g{&encoder, &seg_decoder};
  if (dmr_decoder) g.push_back(&*dmr_decoder);
  return g;
}

template <typename T>
std::vector<ParamGroup<T>*> ModelParams<T>::groups() {
  std::vector<ParamGroup<T>*> g{&encoder, &seg_decoder};
  if (dmr_decoder) g.push_back(&*dmr_decoder);
  return g;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::learnables() {
  std::vector<Tensor<T>*> out;
  for (auto* g : groups())
    for (auto& p : g->params()) out.push_back(&p.tensor);
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams out;
  out.spec = spec;
  out.encoder = encoder.clone();
  out.seg_decoder = seg_decoder.clone();
  if (dmr_decoder) out.dmr_decoder = dmr_decoder->clone();
  return out;
}

namespace {

template <typename U, typename T>
ParamGroup<U> cast_group(const ParamGroup<T>& g) {
  ParamGroup<U> out(g.prefix());
  auto conv = [](const Tensor<T>& t) {
    std::vector<U> v(t.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>(t[i]);
    return Tensor<U>(t.shape(), std::move(v));
  };
  for (const auto& p : g.params()) out.add_param(p.name, conv(p.tensor));
  for (const auto& b : g.buffers()) out.add_buffer(b.name, conv(b.tensor));
  return out;
}

}  // namespace

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.spec = spec;
  out.encoder = cast_group<U>(encoder);
  out.seg_decoder = cast_group<U>(seg_decoder);
  if (dmr_decoder) out.dmr_decoder = cast_group<U>(*dmr_decoder);
  return out;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

constexpr std::uint64_t kDmrStreamSalt = 0x9E3779B97F4A7C15ull;

template <typename T>
class Initializer {
 public:
  Initializer(ParamGroup<T>& group, std::uint64_t seed, bool batchnorm)
      : group_(group), rng_(seed), batchnorm_(batchnorm) {}

  Tensor<T> kaiming(ag::Shape shape, int fan_in) {
    const double b = kaiming_bound(fan_in);
    std::uniform_real_distribution<double> dist(-b, b);
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(dist(rng_));
    return t;
  }

  // conv(k x k, same padding) [-> batchnorm] -> relu
  void conv_unit(const std::string& name, int cin, int cout, int k = 3) {
    group_.add_param(name + ".weight", kaiming({cout, cin, k, k}, cin * k * k));
    // beta already shifts each channel; a bias before batchnorm would only
    // ever see zero gradient.
    if (!batchnorm_) group_.add_param(name + ".bias", Tensor<T>::zeros({cout}));
    if (batchnorm_) {
      group_.add_param(name + ".bn.gamma", Tensor<T>::ones({cout}));
      group_.add_param(name + ".bn.beta", Tensor<T>::zeros({cout}));
      group_.add_buffer(name + ".bn.running_mean", Tensor<T>::zeros({cout}));
      group_.add_buffer(name + ".bn.running_var", Tensor<T>::ones({cout}));
    }
  }

  // Linear 1x1 projection without activation.
  void head(const std::string& name, int cin, int cout) {
    group_.add_param(name + ".weight", kaiming({cout, cin, 1, 1}, cin));
    group_.add_param(name + ".bias", Tensor<T>::zeros({cout}));
  }

  // 2x2 stride-2 transposed conv. Every output sees exactly `cin` inputs.
  void up(const std::string& name, int cin, int cout) {
    group_.add_param(name + ".weight", kaiming({cin, cout, 2, 2}, cin));
  }

 private:
  ParamGroup<T>& group_;
  std::mt19937_64 rng_;
  bool batchnorm_;
};

int decoder_input_channels(const ArchSpec& s, int stage) {
  return stage == 2 ? s.bottleneck_channels : s.stage_channels[stage + 1];
}

// SegNet-style decoder: per stage a low-resolution conv matching the pooled
// channel count, unpooling with the encoder indices, then two convs.
template <typename T>
void init_index_decoder(Initializer<T>& init, const ArchSpec& s, bool with_skips, int out_channels) {
  for (int i = 2; i >= 0; --i) {
    const int c = s.stage_channels[i];
    const std::string stage = "dec" + std::to_string(i);
    init.conv_unit(stage + ".reduce", decoder_input_channels(s, i), c);
    init.conv_unit(stage + ".conv0", with_skips ? 2 * c : c, c);
    init.conv_unit(stage + ".conv1", c, c);
  }
  init.head("head", s.stage_channels[0], out_channels);
}

template <typename T>
ParamGroup<T> init_dmr(const ArchSpec& spec, std::uint64_t seed) {
  ParamGroup<T> dmr("dmr_decoder");
  Initializer<T> init(dmr, seed ^ kDmrStreamSalt, spec.use_batchnorm);
  init_index_decoder(init, spec, false, spec.num_classes - 1);
  return dmr;
}

}  // namespace

template <typename T>
ModelParams<T> build_model(const ArchSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams<T> m;
  m.spec = spec;
  const auto& ch = spec.stage_channels;
  {
    Initializer<T> init(m.encoder, seed, spec.use_batchnorm);
    int prev = spec.in_channels;
    for (int i = 0; i < 3; ++i) {
      const std::string stage = "stage" + std::to_string(i);
      init.conv_unit(stage + ".conv0", prev, ch[i]);
      init.conv_unit(stage + ".conv1", ch[i], ch[i]);
      prev = ch[i];
    }
    init.conv_unit("bottleneck.conv0", prev, spec.bottleneck_channels);
    init.conv_unit("bottleneck.conv1", spec.bottleneck_channels, spec.bottleneck_channels);
  }
  {
    // Separate stream so the seg decoder does not depend on encoder layout.
    Initializer<T> init(m.seg_decoder, seed + 1, spec.use_batchnorm);
    switch (spec.variant) {
      case Variant::kSegNet: init_index_decoder(init, spec, false, spec.num_classes); break;
      case Variant::kUSegNet: init_index_decoder(init, spec, true, spec.num_classes); break;
      case Variant::kUNet:
        for (int i = 2; i >= 0; --i) {
          const std::string stage = "dec" + std::to_string(i);
          init.up("up" + std::to_string(i), decoder_input_channels(spec, i), ch[i]);
          init.conv_unit(stage + ".conv0", 2 * ch[i], ch[i]);
          init.conv_unit(stage + ".conv1", ch[i], ch[i]);
        }
        init.head("head", ch[0], spec.num_classes);
        break;
    }
  }
  if (spec.dmr_attached) m.dmr_decoder = init_dmr<T>(spec, seed);
  return m;
}

template <typename T>
ModelParams<T> detach_regularizer(const ModelParams<T>& params) {
  if (!params.dmr_decoder) throw UsageError("detach_regularizer: no regularizer attached");
  ModelParams<T> out;
  out.spec = params.spec;
  out.spec.dmr_attached = false;
  out.encoder = params.encoder.clone();
  out.seg_decoder = params.seg_decoder.clone();
  return out;
}

template <typename T>
ModelParams<T> attach_regularizer(const ModelParams<T>& params, std::uint64_t seed) {
  if (params.dmr_decoder) throw UsageError("attach_regularizer: regularizer already attached");
  ModelParams<T> out = params.clone();
  out.spec.dmr_attached = true;
  out.dmr_decoder = init_dmr<T>(out.spec, seed);
  return out;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

template <typename T>
Tensor<T> conv_unit(ParamGroup<T>& g, const std::string& name, const Tensor<T>& x, bool bn,
                    Mode mode) {
  const Tensor<T> none;
  Tensor<T> y = ag::conv2d(x, g.param(name + ".weight"), bn ? none : g.param(name + ".bias"), 1, 1);
  if (bn) {
    ag::BatchNormState<T> st{g.buffer(name + ".bn.running_mean"),
                             g.buffer(name + ".bn.running_var")};
    y = ag::batchnorm2d(y, g.param(name + ".bn.gamma"), g.param(name + ".bn.beta"), st, mode);
  }
  return ag::relu(y);
}

template <typename T>
Tensor<T> head(ParamGroup<T>& g, const Tensor<T>& x) {
  return ag::conv2d(x, g.param("head.weight"), g.param("head.bias"), 0, 1);
}

template <typename T>
struct EncoderOutput {
  std::vector<Tensor<T>> skips;
  std::vector<ag::PoolIndices> indices;
  Tensor<T> bottleneck;
};

template <typename T>
Tensor<T> skip_input(const Tensor<T>& skip, const ForwardOptions& opt) {
  return opt.zero_skips ? Tensor<T>::zeros(skip.shape()) : skip;
}

template <typename T>
Tensor<T> index_decoder(ParamGroup<T>& g, const EncoderOutput<T>& enc, bool with_skips, bool bn,
                        Mode mode, const ForwardOptions& opt) {
  Tensor<T> x = enc.bottleneck;
  for (int i = 2; i >= 0; --i) {
    const std::string stage = "dec" + std::to_string(i);
    x = conv_unit(g, stage + ".reduce", x, bn, mode);
    x = ag::max_unpool2x2(x, enc.indices[i]);
    if (with_skips) x = ag::concat_channels(skip_input(enc.skips[i], opt), x);
    x = conv_unit(g, stage + ".conv0", x, bn, mode);
    x = conv_unit(g, stage + ".conv1", x, bn, mode);
  }
  return head(g, x);
}

}  // namespace

template <typename T>
ForwardOutput<T> forward(ModelParams<T>& params, const Tensor<T>& image, Mode mode,
                         const ForwardOptions& options) {
  const ArchSpec& s = params.spec;
  if (image.ndim() != 4 || image.dim(1) != s.in_channels) {
    throw DimensionError("forward: expected B x " + std::to_string(s.in_channels) +
                         " x H x W input, got " + ag::shape_str(image.shape()));
  }
  if (image.dim(2) % 8 != 0 || image.dim(3) % 8 != 0) {
    throw DimensionError("forward: spatial extents must be divisible by 8, got " +
                         ag::shape_str(image.shape()));
  }
  const bool bn = s.use_batchnorm;
  EncoderOutput<T> enc;
  Tensor<T> x = image;
  for (int i = 0; i < 3; ++i) {
    const std::string stage = "stage" + std::to_string(i);
    x = conv_unit(params.encoder, stage + ".conv0", x, bn, mode);
    x = conv_unit(params.encoder, stage + ".conv1", x, bn, mode);
    enc.skips.push_back(x);
    auto pooled = ag::maxpool2x2_with_indices(x);
    x = pooled.output;
    enc.indices.push_back(std::move(pooled.indices));
  }
  x = conv_unit(params.encoder, "bottleneck.conv0", x, bn, mode);
  enc.bottleneck = conv_unit(params.encoder, "bottleneck.conv1", x, bn, mode);

  ForwardOutput<T> out;
  auto& dec = params.seg_decoder;
  switch (s.variant) {
    case Variant::kSegNet: out.logits = index_decoder(dec, enc, false, bn, mode, options); break;
    case Variant::kUSegNet: out.logits = index_decoder(dec, enc, true, bn, mode, options); break;
    case Variant::kUNet: {
      Tensor<T> y = enc.bottleneck;
      for (int i = 2; i >= 0; --i) {
        const std::string stage = "dec" + std::to_string(i);
        y = ag::conv_transpose2d(y, dec.param("up" + std::to_string(i) + ".weight"), 2, 0);
        y = ag::concat_channels(skip_input(enc.skips[i], options), y);
        y = conv_unit(dec, stage + ".conv0", y, bn, mode);
        y = conv_unit(dec, stage + ".conv1", y, bn, mode);
      }
      out.logits = head(dec, y);
      break;
    }
  }
  if (params.dmr_decoder) {
    out.dm_pred = index_decoder(*params.dmr_decoder, enc, false, bn, mode, options);
  }
  return out;
}

template <typename T>
std::vector<std::int32_t> argmax_channels(const Tensor<T>& logits) {
  const int batch = logits.dim(0), c = logits.dim(1);
  const std::size_t plane = static_cast<std::size_t>(logits.dim(2)) * logits.dim(3);
  std::vector<std::int32_t> out(batch * plane, 0);
  for (int n = 0; n < batch; ++n) {
    const T* base = logits.data().data() + static_cast<std::size_t>(n) * c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      int best = 0;
      for (int ch = 1; ch < c; ++ch)
        if (base[ch * plane + p] > base[best * plane + p]) best = ch;
      out[n * plane + p] = best;
    }
  }
  return out;
}

template <typename T>
LabelVolume predict_labels(ModelParams<T>& params, const Volume& volume, int batch_size) {
  ag::NoGradGuard<T> no_grad;
  LabelVolume out(volume.dims, volume.spacing, params.spec.num_classes);
  out.origin = volume.origin;
  const int h = volume.ny(), w = volume.nx();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int z0 = 0; z0 < volume.nz(); z0 += batch_size) {
    const int nb = std::min(batch_size, volume.nz() - z0);
    Tensor<T> x({nb, 1, h, w});
    for (int b = 0; b < nb; ++b) {
      const double* src = volume.voxels.data() + volume.index(0, 0, z0 + b);
      for (std::size_t i = 0; i < plane; ++i) x[b * plane + i] = static_cast<T>(src[i]);
    }
    auto res = forward(params, x, Mode::kEval);
    const auto lab = argmax_channels(res.logits);
    std::copy(lab.begin(), lab.end(),
              out.labels.begin() + static_cast<std::ptrdiff_t>(out.index(0, 0, z0)));
  }
  return out;
}

#define DMRSEG_INSTANTIATE_NETS(T)                                                          \
  template class ParamGroup<T>;                                                             \
  template struct ModelParams<T>;                                                           \
  template ModelParams<T> build_model<T>(const ArchSpec&, std::uint64_t);                   \
  template ForwardOutput<T> forward<T>(ModelParams<T>&, const Tensor<T>&, Mode,             \
                                       const ForwardOptions&);                              \
  template ModelParams<T> detach_regularizer<T>(const ModelParams<T>&);                     \
  template ModelParams<T> attach_regularizer<T>(const ModelParams<T>&, std::uint64_t);      \
  template std::vector<std::int32_t> argmax_channels<T>(const Tensor<T>&);                  \
  template LabelVolume predict_labels<T>(ModelParams<T>&, const Volume&, int);

DMRSEG_INSTANTIATE_NETS(float)
DMRSEG_INSTANTIATE_NETS(double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;

}  // namespace dmrseg::nets
