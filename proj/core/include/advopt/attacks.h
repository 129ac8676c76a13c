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

#ifndef ADVOPT_ATTACKS_H_
#define ADVOPT_ATTACKS_H_

// White-box perturbations against any Solver. All attacks maximize the
// supervised distortion ||f(x + delta) - s||^2 with s the ground truth.
// Inputs may hold several samples as columns; columns are attacked
// independently (the batch loss is a sum, so its gradient splits per column).

#include <limits>
#include <string>
#include <string_view>

#include "advopt/numerics.h"
#include "advopt/optimizers.h"
#include "advopt/tape.h"

namespace advopt {

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

struct AttackBudget {
  double p = kInfNorm;  // norm order, 2 or infinity
  double eps = 0.0;
  void Validate() const;
};

enum class AttackKind { kFgsm, kBim, kNifgsm, kCw };

std::string_view AttackKindName(AttackKind kind);
// Accepts "fgsm", "bim", "nifgsm", "cw" (case-insensitive).
AttackKind ParseAttackKind(std::string_view name);

struct AttackConfig {
  AttackKind kind = AttackKind::kBim;
  AttackBudget budget;
  double alpha = 0.0;  // <= 0 selects the default 2 * eps / steps
  int steps = 10;
  double c = 1e-2;     // CW trade-off
  double decay = 1.0;  // NIFGSM momentum
  double cw_lr = 1e-2;

  double EffectiveAlpha() const;
  void Validate() const;
  static AttackConfig Bim(double eps, int steps = 10);
  static AttackConfig Nifgsm(double eps, int steps = 10, double decay = 1.0);
  static AttackConfig Cw(double c, int steps = 100, double lr = 1e-2);
};

// Records ||f(x) - target||^2 (summed over columns) on `tape` and returns
// the scalar node. `x` is a tape node so callers choose leaf or constant.
NodeId RecordAttackLoss(Tape& tape, const Solver& solver, NodeId x,
                        const DenseMatrix& target);

struct LossGradient {
  DenseVector column_loss;  // ||f(x_j) - s_j||^2 per column
  DenseMatrix grad;         // d loss / d x, same shape as x
  double total() const { return column_loss.sum(); }
};

LossGradient AttackLossGradient(const Solver& solver, const DenseMatrix& x,
                                const DenseMatrix& s);
double AttackLoss(const Solver& solver, const DenseVector& x,
                  const DenseVector& s);

DenseMatrix Fgsm(const Solver& solver, const DenseMatrix& x,
                 const DenseMatrix& s, const AttackBudget& budget);

DenseMatrix Bim(const Solver& solver, const DenseMatrix& x,
                const DenseMatrix& s, const AttackBudget& budget, double alpha,
                int steps);

// Nesterov-momentum iterative FGSM with l1-normalized gradients. A column
// whose gradient has zero l1 norm contributes nothing to the momentum.
DenseMatrix Nifgsm(const Solver& solver, const DenseMatrix& x,
                   const DenseMatrix& s, const AttackBudget& budget,
                   double alpha, int steps, double decay);

// Gradient descent on J(delta) = ||delta||^2 - c ||f(x + delta) - s||^2 from
// delta = 0; returns, per column, the iterate with the lowest J seen.
DenseMatrix Cw(const Solver& solver, const DenseMatrix& x,
               const DenseMatrix& s, double c, double lr, int steps);

DenseMatrix RunAttack(const Solver& solver, const DenseMatrix& x,
                      const DenseMatrix& s, const AttackConfig& cfg);

// ||f(x) - f(x + delta)||_2 per column, both solved with identical settings.
DenseVector Distortion(const Solver& solver, const DenseMatrix& x,
                       const DenseMatrix& delta);
// Same, reusing an already computed clean output f(x).
DenseVector DistortionFromReference(const Solver& solver,
                                    const DenseMatrix& s_star,
                                    const DenseMatrix& x,
                                    const DenseMatrix& delta);

}  // namespace advopt

#endif  // ADVOPT_ATTACKS_H_
