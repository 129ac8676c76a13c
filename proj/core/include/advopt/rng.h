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

#ifndef ADVOPT_RNG_H_
#define ADVOPT_RNG_H_

#include <cstdint>

namespace advopt {

// SplitMix64 (Steele, Lea, Flood 2014). 64-bit state, one add and a
// three-round xor-shift-multiply finalizer per draw. The exact output
// stream is part of the file-format compatibility contract: datasets and
// experiment CSVs are reproducible from a seed only while this algorithm
// and the derived distributions below stay bit-for-bit unchanged.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t NextU64();

  // Uniform on [0, 1) with 53 random mantissa bits.
  double Uniform();

  // Uniform on [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  uint64_t UniformIndex(uint64_t bound);

  // Standard normal via the Box-Muller transform. Consumes exactly two
  // uniforms per call and keeps no cached second variate, so the stream
  // position depends only on the number of calls.
  double Normal();

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

// SplitMix64 finalizer applied to a single word.
uint64_t Mix64(uint64_t z);

// Seed for (master, a, b): Mix64(Mix64(Mix64(master) ^ a') ^ b') with a', b'
// offset by distinct odd constants. Used for per-trial and per-epsilon seeds
// so that trials never share a stream.
uint64_t DeriveSeed(uint64_t master, uint64_t a, uint64_t b = 0);

}  // namespace advopt

#endif  // ADVOPT_RNG_H_
