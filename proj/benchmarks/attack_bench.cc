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

// One attack per iteration against convergent and unfolded solvers.

#include <benchmark/benchmark.h>

#include "advopt/attacks.h"
#include "advopt/dataset.h"

namespace advopt {
namespace {

void BM_BimConvergent(benchmark::State& state) {
  const Dataset d = GenCsDataset(DataSpec{}, 1, 6);
  const LassoObjective obj{d.a, 0.01};
  const Solver solver =
      state.range(0) == 0
          ? Solver::ConvergentIsta(obj, DefaultPgdStep(obj), kDefaultTol, 100000)
          : Solver::Convergent(InitClassicalAdmm(obj, 1.0, 1.0, 1),
                               kDefaultTol, 100000);
  const AttackConfig cfg = AttackConfig::Bim(0.045, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(RunAttack(solver, d.x, d.s, cfg).data());
  }
}
BENCHMARK(BM_BimConvergent)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BimUnfoldedBatch(benchmark::State& state) {
  const Dataset d = GenCsDataset(DataSpec{}, 32, 7);
  const LassoObjective obj{d.a, 0.01};
  const Solver solver =
      Solver::Fixed(InitClassicalPgd(obj, DefaultPgdStep(obj), 5));
  const AttackConfig cfg = AttackConfig::Bim(0.045, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(RunAttack(solver, d.x, d.s, cfg).data());
  }
  state.SetItemsProcessed(state.iterations() * d.count());
}
BENCHMARK(BM_BimUnfoldedBatch)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace advopt
