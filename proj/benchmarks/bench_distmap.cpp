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

#include "dmrseg/distmap.hpp"

namespace {

dmrseg::LabelSlice disc_slice(int n) {
  dmrseg::LabelSlice s(n, n, 0);
  const int r = n / 4;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if ((y - n / 2) * (y - n / 2) + (x - n / 2) * (x - n / 2) <= r * r) s.at(y, x) = 1;
  return s;
}

void BM_SignedDistanceMap(benchmark::State& state) {
  const auto s = disc_slice(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dmrseg::distmap::signed_truncated_dm(s, 1, 250.0, 2));
  }
  state.SetItemsProcessed(state.iterations() * s.size());
}
BENCHMARK(BM_SignedDistanceMap)->Arg(64)->Arg(128)->Arg(256);

}  // namespace
