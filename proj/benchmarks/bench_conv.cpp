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

#include <benchmark/benchmark.h>

#include <random>

#include "dmrseg/networks.hpp"
#include "dmrseg/ops.hpp"

namespace {

namespace ag = dmrseg::autograd;
using TF = ag::Tensor<float>;

TF random(ag::Shape s, std::uint64_t seed) {
  TF t(std::move(s));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// 3x3 conv, batch 8, square input; args: channels, extent.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
  TF x = random({8, c, n, n}, 1), k = random({c, c, 3, 3}, 2), b = random({c}, 3);
  k.set_requires_grad(true);
  for (auto _ : state) {
    ag::Tape<float>::current().clear();
    k.zero_grad();
    ag::backward(ag::sum(ag::conv2d(x, k, b, 1, 1)));
    benchmark::DoNotOptimize(k.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * 8LL * n * n * c * c * 9);
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({8, 64})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMillisecond);

// One training-mode forward/backward of the desk U-Net on a batch of 8.
void BM_DeskUNetStep(benchmark::State& state) {
  dmrseg::nets::ArchSpec s;
  s.stage_channels = {8, 16, 32};
  s.bottleneck_channels = 64;
  s.dmr_attached = state.range(0) != 0;
  auto m = dmrseg::nets::build_model<float>(s, 1);
  TF x = random({8, 1, 64, 64}, 4);
  std::vector<std::int32_t> labels(8 * 64 * 64, 0);
  for (auto _ : state) {
    ag::Tape<float>::current().clear();
    auto out = dmrseg::nets::forward(m, x, ag::Mode::kTrain);
    ag::backward(ag::cross_entropy_loss(out.logits, labels));
  }
}
BENCHMARK(BM_DeskUNetStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
