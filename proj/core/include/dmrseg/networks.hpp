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

#ifndef DMRSEG_NETWORKS_HPP
#define DMRSEG_NETWORKS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmrseg/ops.hpp"
#include "dmrseg/tensor.hpp"
#include "dmrseg/volume.hpp"

namespace dmrseg::nets {

using autograd::Mode;
using autograd::Tensor;

enum class Variant { kSegNet, kUSegNet, kUNet };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// Architecture of one model. The variant fixes the seg-decoder wiring:
/// segnet unpools with encoder indices and has no skips, usegnet uses both,
/// unet uses skips with learned (transposed-conv) up-sampling.
struct ArchSpec {
  Variant variant = Variant::kUNet;
  int in_channels = 1;
  int num_classes = 4;
  std::vector<int> stage_channels{32, 64, 128};
  int bottleneck_channels = 256;
  bool use_batchnorm = true;
  bool dmr_attached = false;
  double dm_threshold = 250.0;

  /// Throws SpecError on an invalid combination.
  void validate() const;
  bool operator==(const ArchSpec&) const = default;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// Learnable tensors plus non-learnable buffers (batchnorm running stats)
/// of one part of the network. Order of insertion is preserved.
template <typename T>
class ParamGroup {
 public:
  explicit ParamGroup(std::string prefix = {}) : prefix_(std::move(prefix)) {}

  const std::string& prefix() const { return prefix_; }
  void add_param(const std::string& name, Tensor<T> t);
  void add_buffer(const std::string& name, Tensor<T> t);

  Tensor<T>& param(const std::string& name);
  const Tensor<T>& param(const std::string& name) const;
  Tensor<T>& buffer(const std::string& name);
  bool has_param(const std::string& name) const;

  std::vector<NamedTensor<T>>& params() { return params_; }
  const std::vector<NamedTensor<T>>& params() const { return params_; }
  std::vector<NamedTensor<T>>& buffers() { return buffers_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

  /// Total number of learnable scalars.
  std::size_t count() const;
  ParamGroup clone() const;

 private:
  std::string prefix_;
  std::vector<NamedTensor<T>> params_;
  std::vector<NamedTensor<T>> buffers_;
};

template <typename T>
struct ModelParams {
  ArchSpec spec;
  ParamGroup<T> encoder{"encoder"};
  ParamGroup<T> seg_decoder{"seg_decoder"};
  std::optional<ParamGroup<T>> dmr_decoder;

  std::size_t parameter_count() const;
  /// Every learnable tensor, encoder first.
  std::vector<Tensor<T>*> learnables();
  std::vector<const ParamGroup<T>*> groups() const;
  std::vector<ParamGroup<T>*> groups();
  ModelParams clone() const;
  /// Convert to another scalar type (values rounded through static_cast).
  template <typename U>
  ModelParams<U> cast() const;
};

template <typename T>
struct ForwardOutput {
  Tensor<T> logits;                 // B x C x H x W
  std::optional<Tensor<T>> dm_pred;  // B x (C-1) x H x W, present iff attached
};

struct ForwardOptions {
  // Replace every skip tensor by zeros before it is consumed. Test hook for
  // checking the variant wiring.
  bool zero_skips = false;
};

/// Kaiming-uniform kernels, zero biases, unit gamma, zero beta. The
/// regularizer decoder draws from its own stream, so attached and detached
/// models built from the same seed share encoder and seg-decoder weights.
template <typename T>
ModelParams<T> build_model(const ArchSpec& spec, std::uint64_t seed);

/// Kaiming-uniform bound sqrt(2) * sqrt(3 / fan_in).
double kaiming_bound(int fan_in);

template <typename T>
ForwardOutput<T> forward(ModelParams<T>& params, const Tensor<T>& image, Mode mode,
                         const ForwardOptions& options = {});

/// Drops the regularizer decoder. Throws UsageError if none is attached.
template <typename T>
ModelParams<T> detach_regularizer(const ModelParams<T>& params);

/// Adds a freshly initialised regularizer decoder.
template <typename T>
ModelParams<T> attach_regularizer(const ModelParams<T>& params, std::uint64_t seed);

/// Per-pixel argmax over channels; ties go to the lower class id.
template <typename T>
std::vector<std::int32_t> argmax_channels(const Tensor<T>& logits);

/// Slice-wise eval-mode inference, stacked back into a volume.
template <typename T>
LabelVolume predict_labels(ModelParams<T>& params, const Volume& volume, int batch_size = 8);

}  // namespace dmrseg::nets

#endif  // DMRSEG_NETWORKS_HPP
