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

#include "dmrseg/metrics.hpp"

namespace {

std::vector<std::uint8_t> ball(int n, int z, double r, double shift) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(n) * n * z, 0);
  for (int k = 0; k < z; ++k)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double dx = x - n / 2.0 - shift, dy = y - n / 2.0, dz = (k - z / 2.0) * 4;
        m[(static_cast<std::size_t>(k) * n + y) * n + x] = dx * dx + dy * dy + dz * dz <= r * r;
      }
  return m;
}

// Both surface metrics on a 256 x 256 x 10 pair.
void BM_SurfaceDistances(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const dmrseg::metrics::Dims d{n, n, 10};
  const dmrseg::Vec3 sp{1.5625, 1.5625, 10};
  const auto a = ball(n, 10, n / 4.0, 0), b = ball(n, 10, n / 4.0, 3);
  for (auto _ : state) {
    const auto sa = dmrseg::metrics::surface(a, d, sp), sb = dmrseg::metrics::surface(b, d, sp);
    benchmark::DoNotOptimize(dmrseg::metrics::msd(sa, sb));
    benchmark::DoNotOptimize(dmrseg::metrics::hausdorff(sa, sb));
  }
}
BENCHMARK(BM_SurfaceDistances)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_LargestComponent(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dmrseg::LabelVolume v({n, n, 10}, {1, 1, 1}, 4);
  const auto a = ball(n, 10, n / 4.0, 0);
  for (std::size_t i = 0; i < a.size(); ++i) v.labels[i] = a[i] ? 1 + static_cast<int>(i % 3) : 0;
  for (auto _ : state) benchmark::DoNotOptimize(dmrseg::metrics::largest_cc_3d(v));
}
BENCHMARK(BM_LargestComponent)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
