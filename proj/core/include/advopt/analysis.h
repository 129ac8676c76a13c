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

#ifndef ADVOPT_ANALYSIS_H_
#define ADVOPT_ANALYSIS_H_

// Robustness certificates and loss-surface geometry.
//
// Lipschitz certificates bound ||f(x1) - f(x2)|| <= C ||x1 - x2|| for the
// fixed-T maps of optimizers.h. They certify the map as implemented: the
// coefficient of x in each layer is the stored B_t.

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "advopt/attacks.h"
#include "advopt/numerics.h"
#include "advopt/optimizers.h"

namespace advopt {

enum class CertificateMethod {
  kPgdClosed,
  kPgdRecursive,
  kAdmmClosed,
  kAdmmRecursive,
};

std::string_view CertificateMethodName(CertificateMethod m);

struct LipschitzCertificate {
  double c = 0.0;
  CertificateMethod method = CertificateMethod::kPgdClosed;
  std::vector<double> per_layer_terms;
};

// Worst-case l2 perturbation for least squares: delta = eps * v with v the
// top right singular vector of (A^T A)^{-1} A^T.
struct WorstCaseDelta {
  DenseVector delta;
  double sigma = 0.0;           // ||(A^T A)^{-1} A^T||_2
  double achieved_shift = 0.0;  // ||s*_adv - s*||_2, equals sigma * eps
  double squared_shift = 0.0;   // achieved_shift^2
};

WorstCaseDelta LsWorstCaseDelta(const DenseMatrix& a, double eps);

// Sum over layers of (prod_{j>t} ||M_j||) ||B_t||. per_layer_terms holds the
// summands.
LipschitzCertificate LipschitzPgd(const UnfoldedModel& model);

// Same constant through c_{t+1} = ||M_t|| c_t + ||B_t||, c_0 = 0.
// per_layer_terms holds c_1 .. c_T.
LipschitzCertificate LipschitzPgdRecursive(const UnfoldedModel& model);

// Iterates the per-step inequalities for (||ds||, ||dv||, ||dy||) per unit
// input perturbation, from zero initial perturbations:
//   ds' = ||M_t|| (dy + dv) + ||B_t||,  dv' = ds' + dy,
//   dy' = |mu_t| (2 ds' + dy).
// C is the final ds; per_layer_terms holds ds_1 .. ds_T.
LipschitzCertificate LipschitzAdmmRecursive(const UnfoldedModel& model);

// Closed form for a model with K = T+1 layers:
//   C = max_i ||B_i|| * prod_{i=0}^{T} (1 + w_i),
//   w_i = 2 ||M_T|| (|mu_{T-1}| + 1) prod_{j=i-1}^{T-2} |mu_j|.
// Products over empty ranges are 1 and mu indices below 0 drop out (a
// missing |mu_{T-1}| counts as 0). per_layer_terms holds w_0 .. w_T.
LipschitzCertificate LipschitzAdmmClosed(const UnfoldedModel& model);

// max(closed, recursive).
LipschitzCertificate SafeAdmmCertificate(const UnfoldedModel& model);

// Certificate used by the harness: closed form for ProxGD, safe for ADMM.
LipschitzCertificate Certify(const UnfoldedModel& model);

// Converts an l_p budget to the l2 radius of the same perturbation set in
// R^n: eps for p <= 2, n^(1/2 - 1/p) eps otherwise.
double BudgetToL2(const AttackBudget& budget, int n);

struct DominationReport {
  int pairs = 0;
  int violations = 0;
  double max_ratio = 0.0;  // max ||f1 - f2|| / ||x1 - x2||
};

// Draws `pairs` random input pairs (alternating independent draws and small
// perturbations of a base point) and counts ||f1 - f2|| > C ||x1 - x2||
// beyond a 1e-9 relative rounding allowance.
DominationReport CheckDomination(const UnfoldedModel& model, double c,
                                 int pairs, uint64_t seed,
                                 double input_scale = 1.0);

enum class DirectionMode { kRandom, kTrajectoryPca };

struct SurfaceOptions {
  double half_width = 1.0;
  int resolution = 21;
  DirectionMode mode = DirectionMode::kRandom;
  uint64_t seed = 0;
  std::vector<DenseVector> trajectory;  // for kTrajectoryPca, and projected
  std::optional<DenseVector> delta;     // evaluate the attacked objective
};

struct SurfaceGrid {
  DenseVector center;
  DenseVector d1, d2;          // unit norm, orthogonal
  std::vector<double> coords;  // shared a/b axis values
  DenseMatrix values;          // values(i, j) at (coords[i], coords[j])
  std::vector<std::pair<double, double>> trajectory_2d;
  bool fallback = false;  // PCA was rank deficient; random complement used
};

// Evaluates the (optionally attacked) objective at
// center + a d1 + b d2 over [-half_width, half_width]^2.
SurfaceGrid ComputeSurfaceGrid(const LassoObjective& obj, const DenseVector& x,
                               const DenseVector& center,
                               const SurfaceOptions& opts);

// (a, b) coordinates of each point relative to grid.center along d1, d2.
std::vector<std::pair<double, double>> ProjectOntoGrid(
    const SurfaceGrid& grid, const std::vector<DenseVector>& points);

}  // namespace advopt

#endif  // ADVOPT_ANALYSIS_H_
