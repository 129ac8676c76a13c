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

#include "advopt/optimizers.h"

#include <cmath>
#include <string>
#include <utility>

namespace advopt {

namespace {

DenseMatrix Broadcast(const DenseVector& v, Eigen::Index cols) {
  return v.replicate(1, cols);
}

LayerNodes ConstantLayer(Tape& tape, const LayerParams& p, SolverKind kind) {
  LayerNodes n;
  n.m = tape.BorrowedConstant(p.m);
  n.b = tape.BorrowedConstant(p.b);
  n.tau = tape.Scalar(p.prox_tau, false);
  if (kind == SolverKind::kAdmm) n.mu = tape.Scalar(p.mu, false);
  return n;
}

// `bx` is the node B x, shared across steps when the parameters are.
NodeId TapePgdStep(Tape& tape, const LayerNodes& n, NodeId s, NodeId bx) {
  return tape.ProxL1(tape.Add(tape.MatVec(n.m, s), bx), n.tau);
}

struct TapedAdmmState {
  NodeId s, v, y;
};

TapedAdmmState TapeAdmmStep(Tape& tape, const LayerNodes& n,
                            const TapedAdmmState& st, NodeId bx) {
  TapedAdmmState next;
  next.s = tape.Add(tape.MatVec(n.m, tape.Sub(st.v, st.y)), bx);
  next.v = tape.ProxL1(tape.Add(next.s, st.y), n.tau);
  next.y = tape.Add(st.y, tape.ScaleBy(n.mu, tape.Sub(next.s, next.v)));
  return next;
}

bool AdmmConverged(const DenseMatrix& s_prev, const DenseMatrix& s,
                   const DenseMatrix& v, double tol) {
  return (s - s_prev).norm() <= tol && (s - v).norm() <= tol;
}

}  // namespace

const char* SolverKindName(SolverKind kind) {
  return kind == SolverKind::kProxGd ? "pgd" : "admm";
}

void LassoObjective::Validate() const {
  if (a.size() == 0) throw InvalidArgument("lasso: empty matrix A");
  if (!(rho > 0.0)) throw InvalidArgument("lasso: rho must be > 0");
  if (!AllFinite(a)) throw InvalidArgument("lasso: A has non-finite entries");
}

void UnfoldedModel::Validate() const {
  ValidateShapes();
  for (size_t t = 0; t < layers.size(); ++t) {
    const LayerParams& p = layers[t];
    if (!AllFinite(p.m) || !AllFinite(p.b) || !std::isfinite(p.mu)) {
      throw InvalidArgument("model: layer " + std::to_string(t) +
                            ": non-finite parameters");
    }
  }
}

void UnfoldedModel::ValidateShapes() const {
  if (layers.empty()) throw InvalidArgument("model: T must be >= 1");
  const Eigen::Index m = s0.size();
  const Eigen::Index n = layers.front().b.cols();
  for (size_t t = 0; t < layers.size(); ++t) {
    const LayerParams& p = layers[t];
    const std::string where = "model: layer " + std::to_string(t) + ": ";
    if (p.m.rows() != m || p.m.cols() != m) {
      throw ShapeError(where + "M is " + ShapeString(p.m) + ", expected " +
                       std::to_string(m) + "x" + std::to_string(m));
    }
    if (p.b.rows() != m || p.b.cols() != n) {
      throw ShapeError(where + "B is " + ShapeString(p.b) + ", expected " +
                       std::to_string(m) + "x" + std::to_string(n));
    }
    if (!(p.prox_tau >= 0.0)) {
      throw InvalidArgument(where + "prox_tau must be >= 0");
    }
  }
  if (kind == SolverKind::kAdmm && !(lambda >= 0.0)) {
    throw InvalidArgument("model: lambda must be >= 0");
  }
}

double DefaultPgdStep(const LassoObjective& obj) {
  const double sigma = SpectralNorm(obj.a);
  return 0.9 / (sigma * sigma);
}

UnfoldedModel InitClassicalPgd(const LassoObjective& obj, double mu, int T) {
  obj.Validate();
  if (!(mu > 0.0)) throw InvalidArgument("init_classical_pgd: mu must be > 0");
  if (T < 1) throw InvalidArgument("init_classical_pgd: T must be >= 1");
  const Eigen::Index m = obj.state_dim();
  LayerParams p;
  p.mu = mu;
  p.rho = obj.rho;
  p.m = DenseMatrix::Identity(m, m) - mu * (obj.a.transpose() * obj.a);
  p.b = mu * obj.a.transpose();
  p.prox_tau = mu * obj.rho;
  UnfoldedModel model;
  model.kind = SolverKind::kProxGd;
  model.layers.assign(T, p);
  model.s0 = DenseVector::Zero(m);
  return model;
}

UnfoldedModel InitClassicalAdmm(const LassoObjective& obj, double lambda,
                                double mu, int T) {
  obj.Validate();
  if (!(lambda > 0.0)) {
    throw InvalidArgument("init_classical_admm: lambda must be > 0");
  }
  if (T < 1) throw InvalidArgument("init_classical_admm: T must be >= 1");
  const Eigen::Index m = obj.state_dim();
  const DenseMatrix reg = obj.a.transpose() * obj.a +
                          2.0 * lambda * DenseMatrix::Identity(m, m);
  const Eigen::LLT<DenseMatrix> llt(reg);
  LayerParams p;
  p.mu = mu;
  p.rho = obj.rho;
  p.m = llt.solve(DenseMatrix::Identity(m, m)) * (2.0 * lambda);
  p.b = llt.solve(obj.a.transpose());
  p.prox_tau = obj.rho / (2.0 * lambda);
  UnfoldedModel model;
  model.kind = SolverKind::kAdmm;
  model.layers.assign(T, p);
  model.lambda = lambda;
  model.s0 = DenseVector::Zero(m);
  return model;
}

DenseMatrix PgdLayer(const LayerParams& p, const DenseMatrix& s,
                     const DenseMatrix& x) {
  if (p.m.cols() != s.rows() || p.b.cols() != x.rows() ||
      s.cols() != x.cols()) {
    throw ShapeError("pgd_layer: M " + ShapeString(p.m) + ", B " +
                     ShapeString(p.b) + ", s " + ShapeString(s) + ", x " +
                     ShapeString(x));
  }
  const DenseMatrix u = Apply(p.m, s) + Apply(p.b, x);
  return ProxL1(u, p.prox_tau);
}

AdmmState AdmmLayer(const LayerParams& p, const AdmmState& st,
                    const DenseMatrix& x) {
  if (p.m.cols() != st.v.rows() || p.b.cols() != x.rows() ||
      st.v.cols() != x.cols() || st.y.rows() != st.v.rows()) {
    throw ShapeError("admm_layer: M " + ShapeString(p.m) + ", B " +
                     ShapeString(p.b) + ", v " + ShapeString(st.v) + ", x " +
                     ShapeString(x));
  }
  AdmmState next;
  const DenseMatrix d = st.v - st.y;
  next.s = Apply(p.m, d) + Apply(p.b, x);
  const DenseMatrix w = next.s + st.y;
  next.v = ProxL1(w, p.prox_tau);
  const DenseMatrix r = next.s - next.v;
  const DenseMatrix step = p.mu * r;
  next.y = st.y + step;
  return next;
}

Trajectory UnfoldForward(const UnfoldedModel& model, const DenseMatrix& x) {
  model.ValidateShapes();
  if (x.rows() != model.input_dim()) {
    throw ShapeError("unfold_forward: x has " + std::to_string(x.rows()) +
                     " rows, model expects " +
                     std::to_string(model.input_dim()));
  }
  Trajectory traj;
  DenseMatrix s = Broadcast(model.s0, x.cols());
  traj.iterates.push_back(s);
  if (model.kind == SolverKind::kProxGd) {
    for (const LayerParams& p : model.layers) {
      s = PgdLayer(p, s, x);
      traj.iterates.push_back(s);
    }
  } else {
    AdmmState st{s, DenseMatrix::Zero(s.rows(), s.cols()),
                 DenseMatrix::Zero(s.rows(), s.cols())};
    for (const LayerParams& p : model.layers) {
      st = AdmmLayer(p, st, x);
      traj.iterates.push_back(st.s);
    }
    s = st.s;
  }
  traj.output = std::move(s);
  return traj;
}

ConvergenceResult RunToConvergence(const UnfoldedModel& tmpl,
                                   const DenseVector& x, double tol,
                                   int max_iter, bool keep_iterates) {
  tmpl.ValidateShapes();
  if (!(tol > 0.0)) throw InvalidArgument("run_to_convergence: tol must be > 0");
  if (max_iter < 1) {
    throw InvalidArgument("run_to_convergence: max_iter must be >= 1");
  }
  if (x.size() != tmpl.input_dim()) {
    throw ShapeError("run_to_convergence: x has length " +
                     std::to_string(x.size()) + ", model expects " +
                     std::to_string(tmpl.input_dim()));
  }
  const LayerParams& p = tmpl.layers.front();
  const DenseMatrix xm = x;
  ConvergenceResult res;
  DenseMatrix s = tmpl.s0;
  if (keep_iterates) res.iterates.push_back(s);
  // B x is loop invariant; hoisting it leaves every iterate bit-identical to
  // the per-layer maps.
  const DenseMatrix bx = Apply(p.b, xm);
  if (tmpl.kind == SolverKind::kProxGd) {
    for (int it = 1; it <= max_iter; ++it) {
      DenseMatrix next = ProxL1(Apply(p.m, s) + bx, p.prox_tau);
      const double change = (next - s).norm();
      s = std::move(next);
      if (keep_iterates) res.iterates.push_back(s);
      res.iterations = it;
      if (change <= tol) {
        res.converged = true;
        break;
      }
    }
  } else {
    AdmmState st{s, DenseMatrix::Zero(s.rows(), 1),
                 DenseMatrix::Zero(s.rows(), 1)};
    for (int it = 1; it <= max_iter; ++it) {
      AdmmState next;
      const DenseMatrix d = st.v - st.y;
      next.s = Apply(p.m, d) + bx;
      const DenseMatrix w = next.s + st.y;
      next.v = ProxL1(w, p.prox_tau);
      const DenseMatrix r = next.s - next.v;
      const DenseMatrix step = p.mu * r;
      next.y = st.y + step;
      const bool done = AdmmConverged(st.s, next.s, next.v, tol);
      st = std::move(next);
      if (keep_iterates) res.iterates.push_back(st.s);
      res.iterations = it;
      if (done) {
        res.converged = true;
        break;
      }
    }
    s = st.s;
  }
  res.s = s.col(0);
  return res;
}

ConvergenceResult RunFactoredIsta(const LassoObjective& obj, double mu,
                                  const DenseVector& x, double tol,
                                  int max_iter) {
  obj.Validate();
  if (!(mu > 0.0)) throw InvalidArgument("run_factored_ista: mu must be > 0");
  if (!(tol > 0.0)) throw InvalidArgument("run_factored_ista: tol must be > 0");
  if (max_iter < 1) {
    throw InvalidArgument("run_factored_ista: max_iter must be >= 1");
  }
  if (x.size() != obj.input_dim()) {
    throw ShapeError("run_factored_ista: x has length " +
                     std::to_string(x.size()) + ", A has " +
                     std::to_string(obj.input_dim()) + " rows");
  }
  const double tau = mu * obj.rho;
  DenseVector s = DenseVector::Zero(obj.state_dim());
  DenseVector r(obj.input_dim());
  DenseVector g(obj.state_dim());
  ConvergenceResult res;
  for (int it = 1; it <= max_iter; ++it) {
    r.noalias() = obj.a * s;
    r -= x;
    g.noalias() = obj.a.transpose() * r;
    double change2 = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double u = s(i) - mu * g(i);
      const double next = u > tau ? u - tau : (u < -tau ? u + tau : 0.0);
      change2 += (next - s(i)) * (next - s(i));
      s(i) = next;
    }
    res.iterations = it;
    if (std::sqrt(change2) <= tol) {
      res.converged = true;
      break;
    }
  }
  res.s = std::move(s);
  return res;
}

double ObjectiveValue(const LassoObjective& obj, const DenseVector& x,
                      const DenseVector& s) {
  if (x.size() != obj.a.rows() || s.size() != obj.a.cols()) {
    throw ShapeError("objective_value: A " + ShapeString(obj.a) + ", x " +
                     std::to_string(x.size()) + ", s " +
                     std::to_string(s.size()));
  }
  return 0.5 * (x - obj.a * s).squaredNorm() + obj.rho * s.lpNorm<1>();
}

double AdversarialObjectiveValue(const LassoObjective& obj,
                                 const DenseVector& x,
                                 const DenseVector& delta,
                                 const DenseVector& s) {
  if (delta.size() != x.size()) {
    throw ShapeError("adversarial_objective_value: delta length mismatch");
  }
  return ObjectiveValue(obj, x + delta, s);
}

Solver Solver::Fixed(UnfoldedModel model) {
  model.Validate();
  Solver s;
  s.model = std::move(model);
  return s;
}

Solver Solver::Convergent(UnfoldedModel tmpl, double tol, int max_iter) {
  tmpl.Validate();
  tmpl.layers.resize(1);
  Solver s;
  s.model = std::move(tmpl);
  s.convergent = true;
  s.tol = tol;
  s.max_iter = max_iter;
  return s;
}

Solver Solver::ConvergentIsta(const LassoObjective& obj, double mu,
                              double tol, int max_iter) {
  Solver s = Convergent(InitClassicalPgd(obj, mu, 1), tol, max_iter);
  s.objective = obj;
  return s;
}

DenseMatrix Infer(const Solver& solver, const DenseMatrix& x) {
  if (!solver.convergent) return UnfoldForward(solver.model, x).output;
  DenseMatrix out(solver.state_dim(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.col(j) =
        solver.objective
            ? RunFactoredIsta(*solver.objective, solver.model.layers[0].mu,
                              x.col(j), solver.tol, solver.max_iter)
                  .s
            : RunToConvergence(solver.model, x.col(j), solver.tol,
                               solver.max_iter)
                  .s;
  }
  return out;
}

TapedModel RecordUnfolded(Tape& tape, const UnfoldedModel& model, NodeId x,
                          ParamMode mode) {
  model.ValidateShapes();
  const Eigen::Index batch = tape.value(x).cols();
  if (tape.value(x).rows() != model.input_dim()) {
    throw ShapeError("record_unfolded: x is " + ShapeString(tape.value(x)) +
                     ", model expects " + std::to_string(model.input_dim()) +
                     " rows");
  }
  const bool train = mode == ParamMode::kTrainable;
  TapedModel tm;
  for (const LayerParams& p : model.layers) {
    LayerNodes n;
    n.m = train ? tape.BorrowedLeaf(p.m) : tape.BorrowedConstant(p.m);
    n.b = train ? tape.BorrowedLeaf(p.b) : tape.BorrowedConstant(p.b);
    n.tau = tape.Scalar(p.prox_tau, train);
    if (model.kind == SolverKind::kAdmm) n.mu = tape.Scalar(p.mu, train);
    tm.layers.push_back(n);
  }
  const NodeId s0 = tape.Constant(Broadcast(model.s0, batch));
  tm.iterates.push_back(s0);
  if (model.kind == SolverKind::kProxGd) {
    NodeId s = s0;
    for (const LayerNodes& n : tm.layers) {
      s = TapePgdStep(tape, n, s, tape.MatVec(n.b, x));
      tm.iterates.push_back(s);
    }
    tm.output = s;
  } else {
    const NodeId zero =
        tape.Constant(DenseMatrix::Zero(model.state_dim(), batch));
    TapedAdmmState st{s0, zero, zero};
    for (const LayerNodes& n : tm.layers) {
      st = TapeAdmmStep(tape, n, st, tape.MatVec(n.b, x));
      tm.iterates.push_back(st.s);
    }
    tm.output = st.s;
  }
  return tm;
}

NodeId RecordSolver(Tape& tape, const Solver& solver, NodeId x) {
  if (!solver.convergent) {
    return RecordUnfolded(tape, solver.model, x, ParamMode::kConstant).output;
  }
  if (tape.value(x).cols() != 1) {
    throw ShapeError("record_solver: convergent solvers take one column");
  }
  const UnfoldedModel& model = solver.model;
  const LayerNodes n = ConstantLayer(tape, model.layers.front(), model.kind);
  const int cap = std::min(solver.attack_iter_cap, solver.max_iter);
  const NodeId s0 = tape.Constant(model.s0);
  const NodeId bx = tape.MatVec(n.b, x);
  if (model.kind == SolverKind::kProxGd) {
    NodeId s = s0;
    for (int it = 0; it < cap; ++it) {
      const NodeId next = TapePgdStep(tape, n, s, bx);
      const double change = (tape.value(next) - tape.value(s)).norm();
      s = next;
      if (change <= solver.tol) break;
    }
    return s;
  }
  const NodeId zero = tape.Constant(DenseMatrix::Zero(model.state_dim(), 1));
  TapedAdmmState st{s0, zero, zero};
  for (int it = 0; it < cap; ++it) {
    TapedAdmmState next = TapeAdmmStep(tape, n, st, bx);
    const bool done = AdmmConverged(tape.value(st.s), tape.value(next.s),
                                    tape.value(next.v), solver.tol);
    st = next;
    if (done) break;
  }
  return st.s;
}

}  // namespace advopt
