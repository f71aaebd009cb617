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

#include "dmrseg/mtl_loss.hpp"

#include <cmath>

#include "dmrseg/error.hpp"
#include "dmrseg/ops.hpp"

namespace dmrseg::mtl {
namespace ag = dmrseg::autograd;

template <typename T>
TaskWeights<T> TaskWeights<T>::init(T s1_value, T s2_value) {
  TaskWeights w{Tensor<T>::scalar(s1_value), Tensor<T>::scalar(s2_value)};
  w.s1.set_requires_grad(true);
  w.s2.set_requires_grad(true);
  return w;
}

template <typename T>
T TaskWeights<T>::sigma1() const {
  return std::exp(s1.item());
}

template <typename T>
T TaskWeights<T>::sigma2() const {
  return std::exp(s2.item());
}

template <typename T>
T TaskWeights<T>::mad_weight() const {
  return std::exp(-s1.item());
}

template <typename T>
T TaskWeights<T>::ce_weight() const {
  return std::exp(T(-2) * s2.item());
}

template <typename T>
Tensor<T> joint_loss(const Tensor<T>& mad, const Tensor<T>& ce, const TaskWeights<T>& w) {
  // Laplace likelihood for the regression (1/sigma1), temperature-scaled
  // softmax for the classification (1/sigma2^2).
  Tensor<T> reg = ag::mul(ag::exp(ag::scale(w.s1, T(-1))), mad);
  Tensor<T> cls = ag::mul(ag::exp(ag::scale(w.s2, T(-2))), ce);
  return ag::add(ag::add(reg, cls), ag::add(w.s1, w.s2));
}

template <typename T>
Tensor<T> fixed_loss(const Tensor<T>& mad, const Tensor<T>& ce, T w1, T w2) {
  if (w1 < T(0) || w2 < T(0)) throw UsageError("fixed_loss: weights must be non-negative");
  return ag::add(ag::scale(mad, w1), ag::scale(ce, w2));
}

template struct TaskWeights<float>;
template struct TaskWeights<double>;
template Tensor<float> joint_loss(const Tensor<float>&, const Tensor<float>&,
                                  const TaskWeights<float>&);
template Tensor<double> joint_loss(const Tensor<double>&, const Tensor<double>&,
                                   const TaskWeights<double>&);
template Tensor<float> fixed_loss(const Tensor<float>&, const Tensor<float>&, float, float);
template Tensor<double> fixed_loss(const Tensor<double>&, const Tensor<double>&, double, double);

}  // namespace dmrseg::mtl
