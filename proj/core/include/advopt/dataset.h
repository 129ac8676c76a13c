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

#ifndef ADVOPT_DATASET_H_
#define ADVOPT_DATASET_H_

// Synthetic compressed-sensing data: x = A s + w with a shared Gaussian
// sensing matrix, k-sparse Gaussian s and Gaussian noise w.

#include <cstdint>

#include "advopt/numerics.h"
#include "advopt/rng.h"

namespace advopt {

struct DataSpec {
  int n = 64;    // measurement dimension
  int m = 256;   // signal dimension
  int k = 3;     // nonzeros per signal
  double matrix_std = 1.0;
  double signal_std = 0.5;
  double noise_std = 0.01;
};

struct Dataset {
  DenseMatrix a;  // n x m
  DenseMatrix x;  // n x count, one pair per column
  DenseMatrix s;  // m x count
  uint64_t seed = 0;
  DataSpec spec;

  Eigen::Index count() const { return x.cols(); }
  // Columns `idx` gathered into a new dataset sharing A.
  Dataset Subset(const std::vector<Eigen::Index>& idx) const;
};

// A ~ N(0, matrix_std^2) drawn first, then `count` pairs.
Dataset GenCsDataset(const DataSpec& spec, int count, uint64_t seed);

// Same sensing matrix draw as GenCsDataset(spec, *, seed).
DenseMatrix DrawSensingMatrix(const DataSpec& spec, Rng& rng);

struct Pair {
  DenseVector x, s;
};
// One (x, s) pair for a given A: support uniform without replacement
// (partial Fisher-Yates), values N(0, signal_std^2), noise N(0, noise_std^2).
Pair DrawPair(const DataSpec& spec, const DenseMatrix& a, Rng& rng);

}  // namespace advopt

#endif  // ADVOPT_DATASET_H_
