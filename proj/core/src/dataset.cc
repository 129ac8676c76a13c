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

#include "advopt/dataset.h"

#include <numeric>
#include <string>
#include <vector>

#include "advopt/errors.h"

namespace advopt {

namespace {

void ValidateSpec(const DataSpec& spec) {
  if (spec.n < 1 || spec.m < 1) {
    throw InvalidArgument("dataset: n and m must be >= 1");
  }
  if (spec.k < 0 || spec.k > spec.m) {
    throw InvalidArgument("dataset: sparsity k=" + std::to_string(spec.k) +
                          " must lie in [0, m=" + std::to_string(spec.m) +
                          "]");
  }
  if (!(spec.signal_std >= 0.0) || !(spec.noise_std >= 0.0) ||
      !(spec.matrix_std >= 0.0)) {
    throw InvalidArgument("dataset: standard deviations must be >= 0");
  }
  if (spec.k > 0 && spec.signal_std == 0.0) {
    throw InvalidArgument("dataset: k > 0 needs signal_std > 0");
  }
}

}  // namespace

Dataset Dataset::Subset(const std::vector<Eigen::Index>& idx) const {
  Dataset out;
  out.a = a;
  out.seed = seed;
  out.spec = spec;
  out.x.resize(x.rows(), static_cast<Eigen::Index>(idx.size()));
  out.s.resize(s.rows(), static_cast<Eigen::Index>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) {
    out.x.col(j) = x.col(idx[j]);
    out.s.col(j) = s.col(idx[j]);
  }
  return out;
}

DenseMatrix DrawSensingMatrix(const DataSpec& spec, Rng& rng) {
  ValidateSpec(spec);
  DenseMatrix a(spec.n, spec.m);
  // Row-major draw order, independent of Eigen's storage order.
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.m; ++j) a(i, j) = rng.Normal(0.0, spec.matrix_std);
  }
  return a;
}

Pair DrawPair(const DataSpec& spec, const DenseMatrix& a, Rng& rng) {
  ValidateSpec(spec);
  Pair p;
  p.s = DenseVector::Zero(spec.m);
  std::vector<int> pool(spec.m);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < spec.k; ++i) {
    const auto j = i + static_cast<int>(rng.UniformIndex(spec.m - i));
    std::swap(pool[i], pool[j]);
    double v = 0.0;
    // A nonzero entry must stay nonzero; N(0, sd^2) hits 0 with probability 0.
    while (v == 0.0 && spec.signal_std > 0.0) {
      v = rng.Normal(0.0, spec.signal_std);
    }
    p.s(pool[i]) = v;
  }
  DenseVector w(spec.n);
  for (int i = 0; i < spec.n; ++i) w(i) = rng.Normal(0.0, spec.noise_std);
  p.x = a * p.s + w;
  return p;
}

Dataset GenCsDataset(const DataSpec& spec, int count, uint64_t seed) {
  ValidateSpec(spec);
  if (count < 1) throw InvalidArgument("dataset: count must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.spec = spec;
  d.seed = seed;
  d.a = DrawSensingMatrix(spec, rng);
  d.x.resize(spec.n, count);
  d.s.resize(spec.m, count);
  for (int c = 0; c < count; ++c) {
    Pair p = DrawPair(spec, d.a, rng);
    d.x.col(c) = p.x;
    d.s.col(c) = p.s;
  }
  return d;
}

}  // namespace advopt
