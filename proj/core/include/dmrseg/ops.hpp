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

#ifndef DMRSEG_OPS_HPP
#define DMRSEG_OPS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "dmrseg/tensor.hpp"

namespace dmrseg::autograd {

enum class Mode { kTrain, kEval };

/// Argmax positions from 2x2 max pooling. Each entry is a flat offset into
/// the H x W plane of the pooled input (same batch and channel).
struct PoolIndices {
  Shape input_shape;  // B x C x H x W of the tensor that was pooled
  std::vector<std::int32_t> index;
};

template <typename T>
struct PoolResult {
  Tensor<T> output;
  PoolIndices indices;
};

/// Running statistics for batchnorm2d. Handles share storage with the model
/// buffers they were created from.
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  static BatchNormState init(int channels) {
    return {Tensor<T>::zeros({channels}), Tensor<T>::ones({channels})};
  }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Cross-correlation over B x Cin x H x W with a Cout x Cin x K x K kernel.
// `bias` may be undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int padding = 0, int stride = 1);

// Adjoint of conv2d. `kernel` is Cin x Cout x K x K, i.e. the kernel of the
// conv2d this operation transposes.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride,
                           int padding = 0);

template <typename T>
PoolResult<T> maxpool2x2_with_indices(const Tensor<T>& input);

template <typename T>
Tensor<T> max_unpool2x2(const Tensor<T>& input, const PoolIndices& indices);

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode);

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

/// Mean over pixels of -log softmax at the true class. `labels` holds
/// B*H*W class ids in row-major order.
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::int32_t> labels);

/// Mean absolute difference.
template <typename T>
Tensor<T> mad_loss(const Tensor<T>& pred, const Tensor<T>& target);

// Elementwise helpers used to compose losses.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> exp(const Tensor<T>& a);
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

}  // namespace dmrseg::autograd

#endif  // DMRSEG_OPS_HPP
