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

#ifndef ADVOPT_OPTIMIZERS_H_
#define ADVOPT_OPTIMIZERS_H_

// Proximal gradient descent (ISTA) and ADMM for the l1-regularized
// least-squares objective 0.5 ||x - A s||^2 + rho ||s||_1, as fixed-T
// unfolded maps and as run-to-convergence solvers.
//
// Layer convention: `b` is the matrix actually multiplied by x. The classical
// ISTA initialization folds the step size into it (b = mu A^T); the layer
// itself never re-applies mu to b.

#include <optional>
#include <vector>

#include "advopt/numerics.h"
#include "advopt/tape.h"

namespace advopt {

enum class SolverKind { kProxGd, kAdmm };

const char* SolverKindName(SolverKind kind);

struct LassoObjective {
  DenseMatrix a;  // n x m
  double rho = 0.01;

  Eigen::Index input_dim() const { return a.rows(); }
  Eigen::Index state_dim() const { return a.cols(); }
  void Validate() const;
};

struct LayerParams {
  double mu = 0.0;        // step size (ADMM dual step; absorbed into b for ISTA)
  double rho = 0.0;       // regularization weight, informational
  DenseMatrix m;          // state_dim x state_dim
  DenseMatrix b;          // state_dim x input_dim
  double prox_tau = 0.0;  // soft-threshold level
};

struct UnfoldedModel {
  SolverKind kind = SolverKind::kProxGd;
  std::vector<LayerParams> layers;
  double lambda = 0.0;  // ADMM penalty, classical mode only
  DenseVector s0;       // initial iterate (v0 = y0 = 0 for ADMM)

  int T() const { return static_cast<int>(layers.size()); }
  Eigen::Index state_dim() const { return s0.size(); }
  Eigen::Index input_dim() const {
    return layers.empty() ? 0 : layers.front().b.cols();
  }
  // Throws ShapeError naming the offending layer, InvalidArgument for
  // non-finite parameters. ValidateShapes skips the finiteness scan.
  void Validate() const;
  void ValidateShapes() const;
};

// 0.9 / sigma_max(A)^2, i.e. 0.9 / sigma_max(A^T A).
double DefaultPgdStep(const LassoObjective& obj);

// Every layer: M = I - mu A^T A, B = mu A^T, prox_tau = mu rho; s0 = 0.
UnfoldedModel InitClassicalPgd(const LassoObjective& obj, double mu, int T);

// Every layer: M = 2 lambda (A^T A + 2 lambda I)^{-1},
// B = (A^T A + 2 lambda I)^{-1} A^T, prox_tau = rho / (2 lambda).
UnfoldedModel InitClassicalAdmm(const LassoObjective& obj, double lambda,
                                double mu, int T);

// prox_l1(M s + B x, prox_tau). Columns of `s` and `x` are samples.
DenseMatrix PgdLayer(const LayerParams& p, const DenseMatrix& s,
                     const DenseMatrix& x);

struct AdmmState {
  DenseMatrix s, v, y;
};

// s <- M (v - y) + B x;  v <- prox_l1(s + y, prox_tau);  y <- y + mu (s - v).
AdmmState AdmmLayer(const LayerParams& p, const AdmmState& state,
                    const DenseMatrix& x);

struct Trajectory {
  DenseMatrix output;              // s_T
  std::vector<DenseMatrix> iterates;  // s_0 .. s_T
};

Trajectory UnfoldForward(const UnfoldedModel& model, const DenseMatrix& x);

struct ConvergenceResult {
  DenseVector s;
  int iterations = 0;
  bool converged = false;
  std::vector<DenseVector> iterates;  // filled when requested
};

inline constexpr double kDefaultTol = 1e-6;
inline constexpr int kDefaultMaxIter = 5000;

// Repeats layer 0 of `tmpl` until ||s_{t+1} - s_t|| <= tol (ADMM also needs
// the primal residual ||s - v|| <= tol) or max_iter is reached. Hitting
// max_iter is reported through `converged`, not thrown.
ConvergenceResult RunToConvergence(const UnfoldedModel& tmpl,
                                   const DenseVector& x,
                                   double tol = kDefaultTol,
                                   int max_iter = kDefaultMaxIter,
                                   bool keep_iterates = false);

// Classical ISTA to convergence in the factored form above, same stopping
// rule as RunToConvergence.
ConvergenceResult RunFactoredIsta(const LassoObjective& obj, double mu,
                                  const DenseVector& x,
                                  double tol = kDefaultTol,
                                  int max_iter = kDefaultMaxIter);

double ObjectiveValue(const LassoObjective& obj, const DenseVector& x,
                      const DenseVector& s);
// Objective evaluated on the perturbed input x + delta.
double AdversarialObjectiveValue(const LassoObjective& obj,
                                 const DenseVector& x,
                                 const DenseVector& delta,
                                 const DenseVector& s);

// An inference map x -> s: either a fixed-T unfolded model or a classical
// solver iterated to convergence.
struct Solver {
  UnfoldedModel model;  // one-layer template when convergent
  bool convergent = false;
  double tol = kDefaultTol;
  int max_iter = kDefaultMaxIter;
  // Gradients through a convergent solver follow the executed iterations,
  // but at most this many.
  int attack_iter_cap = 300;
  // Set by ConvergentIsta. Inference then iterates
  // s <- prox(s - mu A^T (A s - x), mu rho), reading 2nm matrix entries per
  // step instead of m^2. Same fixed point as the M/B template; iterates
  // differ only by rounding. Tapes always use the M/B template.
  std::optional<LassoObjective> objective;

  static Solver Fixed(UnfoldedModel model);
  static Solver Convergent(UnfoldedModel tmpl, double tol = kDefaultTol,
                           int max_iter = kDefaultMaxIter);
  static Solver ConvergentIsta(const LassoObjective& obj, double mu,
                               double tol = kDefaultTol,
                               int max_iter = kDefaultMaxIter);
  Eigen::Index input_dim() const { return model.input_dim(); }
  Eigen::Index state_dim() const { return model.state_dim(); }
};

// Applies the solver to every column of x.
DenseMatrix Infer(const Solver& solver, const DenseMatrix& x);

// ---- Tape recording -------------------------------------------------------

enum class ParamMode { kConstant, kTrainable };

struct LayerNodes {
  NodeId m, b, tau, mu;  // mu only recorded for ADMM
};

struct TapedModel {
  std::vector<LayerNodes> layers;
  NodeId output;
  std::vector<NodeId> iterates;  // s_0 .. s_T
};

// Records the fixed-T forward pass on x (a node with one column per sample).
// kTrainable makes M, B, prox_tau (and mu for ADMM) leaves. The tape borrows
// M and B, so `model` must outlive it and stay unchanged while it is used.
TapedModel RecordUnfolded(Tape& tape, const UnfoldedModel& model, NodeId x,
                          ParamMode mode);

// Records a solver with constant parameters (borrowed, as above). Convergent solvers are unrolled
// for the iterations they actually execute, capped at attack_iter_cap; x must
// then be a single column.
NodeId RecordSolver(Tape& tape, const Solver& solver, NodeId x);

}  // namespace advopt

#endif  // ADVOPT_OPTIMIZERS_H_
