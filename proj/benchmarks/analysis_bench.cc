// Copyright 2026 The advopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Certificates and spectral norms at desk scale.

#include <benchmark/benchmark.h>

#include "advopt/analysis.h"
#include "advopt/dataset.h"

namespace advopt {
namespace {

void BM_SpectralNorm(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const Dataset d = GenCsDataset(DataSpec{64, m, 3}, 1, 8);
  for (auto _ : state) benchmark::DoNotOptimize(SpectralNorm(d.a));
}
BENCHMARK(BM_SpectralNorm)->Arg(64)->Arg(256);

void BM_Certify(benchmark::State& state) {
  const Dataset d = GenCsDataset(DataSpec{}, 1, 9);
  const LassoObjective obj{d.a, 0.01};
  const UnfoldedModel model =
      state.range(0) == 0 ? InitClassicalPgd(obj, DefaultPgdStep(obj), 5)
                          : InitClassicalAdmm(obj, 1.0, 1.0, 6);
  for (auto _ : state) benchmark::DoNotOptimize(Certify(model).c);
}
BENCHMARK(BM_Certify)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace advopt

BENCHMARK_MAIN();
