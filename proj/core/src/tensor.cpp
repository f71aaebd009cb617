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

#include "dmrseg/tensor.hpp"

#include <sstream>

#include "dmrseg/error.hpp"

namespace dmrseg::autograd {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<Impl>()) {
  const std::size_t n = shape_numel(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(n, fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out(impl_->shape, impl_->data);
  out.set_requires_grad(impl_->requires_grad);
  return out;
}

template <typename T>
Tape<T>& Tape<T>::current() {
  thread_local Tape tape;
  return tape;
}

template <typename T>
std::ptrdiff_t Tape<T>::find(const TensorImpl<T>* out) const {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].output.get() == out) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() needs a scalar loss");
  }
  auto& tape = Tape<T>::current();
  const std::ptrdiff_t start = tape.find(loss.impl().get());
  if (start < 0) {
    throw UsageError("backward() called on a tensor that is not on the tape");
  }
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] += T(1);
  const auto& nodes = tape.nodes();
  for (std::ptrdiff_t i = start; i >= 0; --i) {
    const auto& node = nodes[static_cast<std::size_t>(i)];
    if (node.output->grad.empty()) continue;
    node.backward();
  }
  tape.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace dmrseg::autograd
