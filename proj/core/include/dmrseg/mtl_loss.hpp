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

#ifndef DMRSEG_MTL_LOSS_HPP
#define DMRSEG_MTL_LOSS_HPP

#include "dmrseg/tensor.hpp"

namespace dmrseg::mtl {

using autograd::Tensor;

/// Learned log-scales of the two task noise terms: sigma1 = exp(s1) for the
/// distance-map regression, sigma2 = exp(s2) for the segmentation
/// temperature. Both start at 0, i.e. unit weights.
template <typename T>
struct TaskWeights {
  Tensor<T> s1;
  Tensor<T> s2;

  static TaskWeights init(T s1_value = T(0), T s2_value = T(0));

  T sigma1() const;
  T sigma2() const;
  /// Multiplier applied to the MAD term, exp(-s1).
  T mad_weight() const;
  /// Multiplier applied to the cross-entropy term, exp(-2 s2).
  T ce_weight() const;
};

/// exp(-s1) * mad + exp(-2 s2) * ce + s1 + s2
template <typename T>
Tensor<T> joint_loss(const Tensor<T>& mad, const Tensor<T>& ce, const TaskWeights<T>& w);

/// w1 * mad + w2 * ce with constant, non-negative weights.
template <typename T>
Tensor<T> fixed_loss(const Tensor<T>& mad, const Tensor<T>& ce, T w1, T w2);

extern template struct TaskWeights<float>;
extern template struct TaskWeights<double>;

}  // namespace dmrseg::mtl

#endif  // DMRSEG_MTL_LOSS_HPP
