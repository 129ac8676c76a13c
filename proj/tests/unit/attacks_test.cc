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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "advopt/analysis.h"
#include "advopt/attacks.h"
#include "advopt/dataset.h"
#include "advopt/errors.h"
#include "oracles.h"

namespace advopt {
namespace {

// One-layer map f(x) = x.
Solver IdentitySolver(int n) {
  UnfoldedModel m;
  LayerParams p;
  p.m = DenseMatrix::Zero(n, n);
  p.b = DenseMatrix::Identity(n, n);
  p.prox_tau = 0.0;
  m.layers.push_back(p);
  m.s0 = DenseVector::Zero(n);
  return Solver::Fixed(m);
}

// d/dx ||f(x) - s||^2 for a fixed-T ProxGD model by a hand-written reverse
// sweep over the straight-line forward pass.
DenseVector HandGradient(const UnfoldedModel& model, const DenseVector& x,
                         const DenseVector& s) {
  const std::vector<DenseVector> it = oracle::IstaIterates(model, x);
  DenseVector gs = 2.0 * (it.back() - s);
  DenseVector gx = DenseVector::Zero(x.size());
  for (int t = model.T() - 1; t >= 0; --t) {
    const LayerParams& p = model.layers[t];
    const DenseVector u =
        oracle::MatVec(p.m, it[t]) + oracle::MatVec(p.b, x);
    DenseVector gu(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      gu(i) = std::abs(u(i)) > p.prox_tau ? gs(i) : 0.0;
    }
    gx += oracle::MatVec(p.b.transpose(), gu);
    gs = oracle::MatVec(p.m.transpose(), gu);
  }
  return gx;
}

double Sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

DenseVector SignOf(const DenseVector& v) {
  DenseVector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = Sgn(v(i));
  return out;
}

DenseVector Clip(const DenseVector& v, double eps) {
  DenseVector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out(i) = std::min(eps, std::max(-eps, v(i)));
  }
  return out;
}

struct Instance {
  UnfoldedModel model;
  DenseVector x, s;
};

Instance RandomInstance(std::mt19937_64& gen, int n = 8, int m = 16, int T = 4) {
  Instance in;
  in.model = oracle::RandomModel(SolverKind::kProxGd, n, m, T, gen);
  in.s = DenseVector::Zero(m);
  for (int i = 0; i < 3; ++i) in.s(static_cast<int>(gen() % m)) = 0.5;
  in.x = oracle::GaussianVec(n, gen);
  return in;
}

void ExpectInBudget(const DenseMatrix& d, double eps) {
  EXPECT_LE(d.cwiseAbs().maxCoeff(), eps);
}

TEST(AttackLoss, ZeroAtTarget) {
  std::mt19937_64 gen(1);
  const Instance in = RandomInstance(gen);
  const Solver solver = Solver::Fixed(in.model);
  const DenseVector out = Infer(solver, in.x).col(0);
  EXPECT_EQ(AttackLoss(solver, in.x, out), 0.0);
}

TEST(AttackLoss, MatchesDuplicateAndFiniteDifference) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = RandomInstance(gen);
    const Solver solver = Solver::Fixed(in.model);
    const double ref =
        (oracle::ModelOutput(in.model, in.x) - in.s).squaredNorm();
    EXPECT_NEAR(AttackLoss(solver, in.x, in.s), ref, 1e-12 * (1 + ref));
    Tape tape;
    const NodeId xn = tape.Leaf(in.x);
    const NodeId loss = RecordAttackLoss(tape, solver, xn, in.s);
    EXPECT_NEAR(tape.scalar(loss), ref, 1e-12 * (1 + ref));
    EXPECT_LE(GradCheck(tape, loss, xn, 1e-6), 1e-4);
    const LossGradient lg = AttackLossGradient(solver, in.x, in.s);
    EXPECT_LE((lg.grad.col(0) - HandGradient(in.model, in.x, in.s)).norm(),
              1e-10);
  }
}

TEST(AttackLoss, GradientThroughConvergentSolver) {
  std::mt19937_64 gen(3);
  const LassoObjective obj{oracle::Gaussian(6, 12, gen), 0.05};
  const Solver admm = Solver::Convergent(InitClassicalAdmm(obj, 1.0, 1.0, 1));
  const DenseVector x = oracle::GaussianVec(6, gen);
  const DenseVector s = oracle::GaussianVec(12, gen, 0.3);
  Tape tape;
  const NodeId xn = tape.Leaf(x);
  const NodeId loss = RecordAttackLoss(tape, admm, xn, s);
  EXPECT_LE(GradCheck(tape, loss, xn, 1e-6), 1e-4);
}

TEST(Fgsm, ZeroBudget) {
  std::mt19937_64 gen(4);
  const Instance in = RandomInstance(gen);
  const DenseMatrix d = Fgsm(Solver::Fixed(in.model), in.x, in.s, {kInfNorm, 0});
  EXPECT_EQ(d.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Fgsm, ZeroGradientGivesZero) {
  const Solver id = IdentitySolver(3);
  const DenseVector x = DenseVector::Constant(3, 0.4);
  EXPECT_EQ(Fgsm(id, x, x, {kInfNorm, 0.1}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Fgsm, IdentityModel) {
  const Solver id = IdentitySolver(4);
  DenseVector x(4), s(4);
  x << 1.0, -2.0, 0.5, 0.3;
  s << 0.0, 1.0, 0.5, -1.0;
  DenseVector want(4);
  want << 0.1, -0.1, 0.0, 0.1;
  EXPECT_EQ(Fgsm(id, x, s, {kInfNorm, 0.1}).col(0), want);
}

TEST(Fgsm, RejectsL2Budget) {
  const Solver id = IdentitySolver(2);
  const DenseVector x = DenseVector::Ones(2);
  EXPECT_THROW(Fgsm(id, x, x, {2.0, 0.1}), InvalidArgument);
  EXPECT_THROW(Bim(id, x, x, {2.0, 0.1}, 0.01, 3), InvalidArgument);
  EXPECT_THROW(Nifgsm(id, x, x, {2.0, 0.1}, 0.01, 3, 1.0), InvalidArgument);
}

TEST(Bim, SingleFullStepIsFgsm) {
  std::mt19937_64 gen(5);
  const Instance in = RandomInstance(gen);
  const Solver solver = Solver::Fixed(in.model);
  const AttackBudget b{kInfNorm, 0.05};
  EXPECT_EQ(Bim(solver, in.x, in.s, b, 0.07, 1),
            Fgsm(solver, in.x, in.s, b));
}

TEST(Bim, ZeroStepsZeroDelta) {
  std::mt19937_64 gen(6);
  const Instance in = RandomInstance(gen);
  EXPECT_EQ(Bim(Solver::Fixed(in.model), in.x, in.s, {kInfNorm, 0.05}, 0.01, 0)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(Bim, MatchesStraightLine) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = RandomInstance(gen);
    const double eps = 0.05, alpha = 0.013;
    DenseVector d = DenseVector::Zero(in.x.size());
    for (int t = 0; t < 5; ++t) {
      d = Clip(alpha * SignOf(HandGradient(in.model, in.x + d, in.s)) + d, eps);
    }
    const DenseMatrix got =
        Bim(Solver::Fixed(in.model), in.x, in.s, {kInfNorm, eps}, alpha, 5);
    EXPECT_LE((got.col(0) - d).cwiseAbs().maxCoeff(), 1e-15);
    ExpectInBudget(got, eps);
  }
}

TEST(Nifgsm, NoMomentumSingleStepIsBim) {
  std::mt19937_64 gen(8);
  const Instance in = RandomInstance(gen);
  const Solver solver = Solver::Fixed(in.model);
  const AttackBudget b{kInfNorm, 0.05};
  EXPECT_EQ(Nifgsm(solver, in.x, in.s, b, 0.01, 1, 0.0),
            Bim(solver, in.x, in.s, b, 0.01, 1));
}

TEST(Nifgsm, ZeroBudget) {
  std::mt19937_64 gen(9);
  const Instance in = RandomInstance(gen);
  AttackConfig cfg = AttackConfig::Nifgsm(0.0, 10, 1.0);
  EXPECT_EQ(RunAttack(Solver::Fixed(in.model), in.x, in.s, cfg)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(Nifgsm, MatchesStraightLine) {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = RandomInstance(gen);
    const double eps = 0.05, alpha = 0.01, decay = 0.8;
    DenseVector d = DenseVector::Zero(in.x.size());
    DenseVector g = DenseVector::Zero(in.x.size());
    for (int t = 0; t < 3; ++t) {
      const DenseVector grad =
          HandGradient(in.model, in.x + d + alpha * decay * g, in.s);
      double l1 = 0.0;
      for (Eigen::Index i = 0; i < grad.size(); ++i) l1 += std::abs(grad(i));
      g = decay * g;
      if (l1 > 0) g += grad / l1;
      d = Clip(d + alpha * SignOf(g), eps);
    }
    const DenseMatrix got = Nifgsm(Solver::Fixed(in.model), in.x, in.s,
                                   {kInfNorm, eps}, alpha, 3, decay);
    EXPECT_LE((got.col(0) - d).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Cw, TinyTradeoffStaysNearZero) {
  std::mt19937_64 gen(11);
  const Instance in = RandomInstance(gen);
  const DenseMatrix d = Cw(Solver::Fixed(in.model), in.x, in.s, 1e-12, 1e-2, 100);
  EXPECT_LE(d.norm(), 1e-6);
}

TEST(Cw, ZeroSteps) {
  std::mt19937_64 gen(12);
  const Instance in = RandomInstance(gen);
  EXPECT_EQ(Cw(Solver::Fixed(in.model), in.x, in.s, 1.0, 1e-2, 0).norm(), 0.0);
}

TEST(Cw, ObjectiveNeverWorseThanStart) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = RandomInstance(gen);
    for (double c : {1e-3, 1e-1, 10.0}) {
      const DenseVector d =
          Cw(Solver::Fixed(in.model), in.x, in.s, c, 1e-2, 50).col(0);
      const double j = d.squaredNorm() -
                       c * (oracle::ModelOutput(in.model, in.x + d) - in.s)
                               .squaredNorm();
      const double j0 =
          -c * (oracle::ModelOutput(in.model, in.x) - in.s).squaredNorm();
      EXPECT_LE(j, j0 + 1e-12 * (1 + std::abs(j0)));
    }
  }
}

TEST(AttackConfig, DefaultsAndValidation) {
  const AttackConfig bim = AttackConfig::Bim(0.05, 10);
  EXPECT_DOUBLE_EQ(bim.EffectiveAlpha(), 0.01);
  const AttackConfig cw = AttackConfig::Cw(1e-2, 100, 1e-2);
  EXPECT_NO_THROW(cw.Validate());
  AttackConfig bad = bim;
  bad.budget.eps = -1;
  EXPECT_THROW(bad.Validate(), InvalidArgument);
  AttackConfig badc = cw;
  badc.c = 0;
  EXPECT_THROW(badc.Validate(), InvalidArgument);
  EXPECT_EQ(ParseAttackKind("NIFGSM"), AttackKind::kNifgsm);
  EXPECT_THROW(ParseAttackKind("pgd"), InvalidArgument);
}

TEST(Attacks, BudgetAlwaysRespected) {
  std::mt19937_64 gen(14);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = RandomInstance(gen);
    const Solver solver = Solver::Fixed(in.model);
    const double eps = 0.001 * (1 + trial);
    for (AttackConfig cfg :
         {AttackConfig::Bim(eps, 7), AttackConfig::Nifgsm(eps, 7, 1.0)}) {
      cfg.alpha = 0.9 * eps;  // large steps exercise the clip
      ExpectInBudget(RunAttack(solver, in.x, in.s, cfg), eps);
    }
    ExpectInBudget(Fgsm(solver, in.x, in.s, {kInfNorm, eps}), eps);
  }
}

TEST(Attacks, Deterministic) {
  std::mt19937_64 gen(15);
  const Instance in = RandomInstance(gen);
  const Solver solver = Solver::Fixed(in.model);
  for (const AttackConfig& cfg :
       {AttackConfig::Bim(0.05, 10), AttackConfig::Nifgsm(0.05, 10, 1.0),
        AttackConfig::Cw(0.1, 30, 1e-2)}) {
    EXPECT_EQ(RunAttack(solver, in.x, in.s, cfg),
              RunAttack(solver, in.x, in.s, cfg));
  }
}

TEST(Attacks, BatchEqualsPerColumn) {
  std::mt19937_64 gen(16);
  const Instance in = RandomInstance(gen);
  const Solver solver = Solver::Fixed(in.model);
  const DenseMatrix x = oracle::Gaussian(8, 3, gen);
  const DenseMatrix s = oracle::Gaussian(16, 3, gen, 0.2);
  const AttackConfig cfg = AttackConfig::Bim(0.05, 5);
  const DenseMatrix all = RunAttack(solver, x, s, cfg);
  for (int j = 0; j < 3; ++j) {
    EXPECT_LE((all.col(j) - RunAttack(solver, x.col(j), s.col(j), cfg).col(0))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
  }
}

TEST(Bim, RaisesLossOnMostLassoInstances) {
  DataSpec spec;
  spec.n = 16;
  spec.m = 48;
  spec.k = 3;
  int raised = 0;
  const int instances = 200;
  for (int i = 0; i < instances; ++i) {
    const Dataset d = GenCsDataset(spec, 1, 1000 + i);
    const LassoObjective obj{d.a, 0.01};
    const Solver admm =
        Solver::Convergent(InitClassicalAdmm(obj, 1.0, 1.0, 1), 1e-6, 5000);
    const DenseVector x = d.x.col(0), s = d.s.col(0);
    const DenseMatrix delta =
        RunAttack(admm, x, s, AttackConfig::Bim(0.05, 10));
    ExpectInBudget(delta, 0.05);
    if (AttackLoss(admm, x + delta.col(0), s) >= AttackLoss(admm, x, s)) {
      ++raised;
    }
  }
  EXPECT_GE(raised, 180) << raised << " of " << instances;
}

TEST(Distortion, ZeroPerturbation) {
  std::mt19937_64 gen(17);
  const Instance in = RandomInstance(gen);
  const DenseMatrix x = oracle::Gaussian(8, 4, gen);
  EXPECT_EQ(Distortion(Solver::Fixed(in.model), x, DenseMatrix::Zero(8, 4))
                .cwiseAbs()
                .maxCoeff(),
            0.0);
}

TEST(Distortion, LeastSquaresWorstCase) {
  std::mt19937_64 gen(18);
  const DenseMatrix a = oracle::Gaussian(12, 5, gen);
  const double eps = 0.1;
  const WorstCaseDelta wc = LsWorstCaseDelta(a, eps);
  // Least squares as a one-layer linear map s = A^+ x.
  UnfoldedModel ls;
  LayerParams p;
  p.m = DenseMatrix::Zero(5, 5);
  p.b = PseudoInverse(a);
  ls.layers.push_back(p);
  ls.s0 = DenseVector::Zero(5);
  const DenseMatrix x = oracle::Gaussian(12, 1, gen);
  const double d =
      Distortion(Solver::Fixed(ls), x, DenseMatrix(wc.delta))(0);
  const double sigma =
      Eigen::JacobiSVD<DenseMatrix>(a).singularValues().minCoeff();
  EXPECT_NEAR(d, eps / sigma, 1e-9);
}

TEST(Distortion, ShapeMismatch) {
  const Solver id = IdentitySolver(3);
  EXPECT_THROW(Distortion(id, DenseMatrix::Zero(3, 1), DenseMatrix::Zero(3, 2)),
               ShapeError);
}

}  // namespace
}  // namespace advopt
