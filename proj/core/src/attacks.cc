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

#include "advopt/attacks.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace advopt {

namespace {

void RequireInfBudget(const AttackBudget& budget, const char* who) {
  budget.Validate();
  if (!std::isinf(budget.p)) {
    throw InvalidArgument(std::string(who) +
                          ": only the l-infinity budget is supported");
  }
}

void CheckPair(const Solver& solver, const DenseMatrix& x,
               const DenseMatrix& s) {
  if (x.rows() != solver.input_dim() || s.rows() != solver.state_dim() ||
      x.cols() != s.cols()) {
    throw ShapeError("attack: x " + ShapeString(x) + ", s " + ShapeString(s) +
                     " do not match solver dims " +
                     std::to_string(solver.input_dim()) + " -> " +
                     std::to_string(solver.state_dim()));
  }
}

// Single tape over the whole batch.
LossGradient TapedLossGradient(const Solver& solver, const DenseMatrix& x,
                               const DenseMatrix& s) {
  Tape tape;
  const NodeId xn = tape.Leaf(x);
  const NodeId out = RecordSolver(tape, solver, xn);
  const NodeId diff = tape.Sub(out, tape.Constant(s));
  const NodeId loss = tape.SquaredNorm(diff);
  LossGradient lg;
  lg.column_loss = tape.value(diff).colwise().squaredNorm().transpose();
  lg.grad = tape.Backward(loss).at(xn);
  return lg;
}

}  // namespace

void AttackBudget::Validate() const {
  if (!(eps >= 0.0)) throw InvalidArgument("attack budget: eps must be >= 0");
  if (!(p >= 1.0)) throw InvalidArgument("attack budget: p must be >= 1");
}

std::string_view AttackKindName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kBim: return "bim";
    case AttackKind::kNifgsm: return "nifgsm";
    case AttackKind::kCw: return "cw";
  }
  return "unknown";
}

AttackKind ParseAttackKind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "fgsm") return AttackKind::kFgsm;
  if (lower == "bim") return AttackKind::kBim;
  if (lower == "nifgsm") return AttackKind::kNifgsm;
  if (lower == "cw") return AttackKind::kCw;
  throw InvalidArgument("unknown attack '" + std::string(name) +
                        "' (expected fgsm, bim, nifgsm, cw)");
}

double AttackConfig::EffectiveAlpha() const {
  if (alpha > 0.0) return alpha;
  return steps > 0 ? 2.0 * budget.eps / steps : budget.eps;
}

void AttackConfig::Validate() const {
  budget.Validate();
  if (steps < 0) throw InvalidArgument("attack: steps must be >= 0");
  switch (kind) {
    case AttackKind::kFgsm:
    case AttackKind::kBim:
    case AttackKind::kNifgsm:
      if (!std::isinf(budget.p)) {
        throw InvalidArgument(std::string(AttackKindName(kind)) +
                              ": only the l-infinity budget is supported");
      }
      if (kind == AttackKind::kNifgsm && !(decay >= 0.0)) {
        throw InvalidArgument("nifgsm: decay must be >= 0");
      }
      break;
    case AttackKind::kCw:
      if (!(c > 0.0)) throw InvalidArgument("cw: c must be > 0");
      if (!(cw_lr > 0.0)) throw InvalidArgument("cw: lr must be > 0");
      break;
  }
}

AttackConfig AttackConfig::Bim(double eps, int steps) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kBim;
  cfg.budget = {kInfNorm, eps};
  cfg.steps = steps;
  return cfg;
}

AttackConfig AttackConfig::Nifgsm(double eps, int steps, double decay) {
  AttackConfig cfg = Bim(eps, steps);
  cfg.kind = AttackKind::kNifgsm;
  cfg.decay = decay;
  return cfg;
}

AttackConfig AttackConfig::Cw(double c, int steps, double lr) {
  AttackConfig cfg;
  cfg.kind = AttackKind::kCw;
  cfg.budget = {2.0, 0.0};
  cfg.c = c;
  cfg.steps = steps;
  cfg.cw_lr = lr;
  return cfg;
}

NodeId RecordAttackLoss(Tape& tape, const Solver& solver, NodeId x,
                        const DenseMatrix& target) {
  const NodeId out = RecordSolver(tape, solver, x);
  return tape.SquaredNorm(tape.Sub(out, tape.Constant(target)));
}

LossGradient AttackLossGradient(const Solver& solver, const DenseMatrix& x,
                                const DenseMatrix& s) {
  CheckPair(solver, x, s);
  if (!solver.convergent || x.cols() == 1) {
    return TapedLossGradient(solver, x, s);
  }
  LossGradient lg;
  lg.column_loss.resize(x.cols());
  lg.grad.resize(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    LossGradient one = TapedLossGradient(solver, x.col(j), s.col(j));
    lg.column_loss(j) = one.column_loss(0);
    lg.grad.col(j) = one.grad.col(0);
  }
  return lg;
}

double AttackLoss(const Solver& solver, const DenseVector& x,
                  const DenseVector& s) {
  return (Infer(solver, x) - DenseMatrix(s)).squaredNorm();
}

DenseMatrix Fgsm(const Solver& solver, const DenseMatrix& x,
                 const DenseMatrix& s, const AttackBudget& budget) {
  RequireInfBudget(budget, "fgsm");
  const LossGradient lg = AttackLossGradient(solver, x, s);
  return budget.eps * SignVec(lg.grad);
}

DenseMatrix Bim(const Solver& solver, const DenseMatrix& x,
                const DenseMatrix& s, const AttackBudget& budget, double alpha,
                int steps) {
  RequireInfBudget(budget, "bim");
  if (!(alpha > 0.0)) throw InvalidArgument("bim: alpha must be > 0");
  CheckPair(solver, x, s);
  DenseMatrix delta = DenseMatrix::Zero(x.rows(), x.cols());
  for (int t = 0; t < steps; ++t) {
    const DenseMatrix xt = x + delta;
    const LossGradient lg = AttackLossGradient(solver, xt, s);
    const DenseMatrix step = alpha * SignVec(lg.grad);
    delta = ClipInf(DenseMatrix(step + delta), budget.eps);
  }
  return delta;
}

DenseMatrix Nifgsm(const Solver& solver, const DenseMatrix& x,
                   const DenseMatrix& s, const AttackBudget& budget,
                   double alpha, int steps, double decay) {
  RequireInfBudget(budget, "nifgsm");
  if (!(alpha > 0.0)) throw InvalidArgument("nifgsm: alpha must be > 0");
  if (!(decay >= 0.0)) throw InvalidArgument("nifgsm: decay must be >= 0");
  CheckPair(solver, x, s);
  DenseMatrix delta = DenseMatrix::Zero(x.rows(), x.cols());
  DenseMatrix momentum = DenseMatrix::Zero(x.rows(), x.cols());
  for (int t = 0; t < steps; ++t) {
    const DenseMatrix look_ahead = x + delta + (alpha * decay) * momentum;
    const LossGradient lg = AttackLossGradient(solver, look_ahead, s);
    momentum *= decay;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double l1 = lg.grad.col(j).lpNorm<1>();
      if (l1 > 0.0) momentum.col(j) += lg.grad.col(j) / l1;
    }
    const DenseMatrix step = alpha * SignVec(momentum);
    delta = ClipInf(DenseMatrix(delta + step), budget.eps);
  }
  return delta;
}

DenseMatrix Cw(const Solver& solver, const DenseMatrix& x,
               const DenseMatrix& s, double c, double lr, int steps) {
  if (!(c > 0.0)) throw InvalidArgument("cw: c must be > 0");
  if (!(lr > 0.0)) throw InvalidArgument("cw: lr must be > 0");
  CheckPair(solver, x, s);
  DenseMatrix delta = DenseMatrix::Zero(x.rows(), x.cols());
  DenseMatrix best = delta;
  DenseVector best_j = DenseVector::Constant(
      x.cols(), std::numeric_limits<double>::infinity());
  for (int t = 0; t <= steps; ++t) {
    const LossGradient lg = AttackLossGradient(solver, x + delta, s);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double objective =
          delta.col(j).squaredNorm() - c * lg.column_loss(j);
      if (objective < best_j(j)) {
        best_j(j) = objective;
        best.col(j) = delta.col(j);
      }
    }
    if (t == steps) break;
    delta -= lr * (2.0 * delta - c * lg.grad);
  }
  return best;
}

DenseMatrix RunAttack(const Solver& solver, const DenseMatrix& x,
                      const DenseMatrix& s, const AttackConfig& cfg) {
  cfg.Validate();
  if (cfg.kind != AttackKind::kCw && cfg.budget.eps == 0.0) {
    CheckPair(solver, x, s);
    return DenseMatrix::Zero(x.rows(), x.cols());
  }
  switch (cfg.kind) {
    case AttackKind::kFgsm:
      return Fgsm(solver, x, s, cfg.budget);
    case AttackKind::kBim:
      return Bim(solver, x, s, cfg.budget, cfg.EffectiveAlpha(), cfg.steps);
    case AttackKind::kNifgsm:
      return Nifgsm(solver, x, s, cfg.budget, cfg.EffectiveAlpha(), cfg.steps,
                    cfg.decay);
    case AttackKind::kCw:
      return Cw(solver, x, s, cfg.c, cfg.cw_lr, cfg.steps);
  }
  return DenseMatrix::Zero(x.rows(), x.cols());
}

DenseVector Distortion(const Solver& solver, const DenseMatrix& x,
                       const DenseMatrix& delta) {
  return DistortionFromReference(solver, Infer(solver, x), x, delta);
}

DenseVector DistortionFromReference(const Solver& solver,
                                    const DenseMatrix& s_star,
                                    const DenseMatrix& x,
                                    const DenseMatrix& delta) {
  if (delta.rows() != x.rows() || delta.cols() != x.cols()) {
    throw ShapeError("distortion: delta " + ShapeString(delta) + " vs x " +
                     ShapeString(x));
  }
  const DenseMatrix adv = Infer(solver, x + delta);
  return (s_star - adv).colwise().norm().transpose();
}

}  // namespace advopt
