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

#ifndef ADVOPT_TESTS_ORACLES_H_
#define ADVOPT_TESTS_ORACLES_H_

// Reference computations for tests. Everything here is written with plain
// loops and std::mt19937_64 so that it shares no code path with the library.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "advopt/numerics.h"
#include "advopt/optimizers.h"

namespace advopt::oracle {

inline DenseMatrix Gaussian(int rows, int cols, std::mt19937_64& gen,
                            double std = 1.0) {
  std::normal_distribution<double> nd(0.0, std);
  DenseMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = nd(gen);
  }
  return m;
}

inline DenseVector GaussianVec(int n, std::mt19937_64& gen, double std = 1.0) {
  return Gaussian(n, 1, gen, std).col(0);
}

inline DenseVector MatVec(const DenseMatrix& a, const DenseVector& v) {
  DenseVector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    long double acc = 0.0L;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      acc += static_cast<long double>(a(i, j)) * v(j);
    }
    out(i) = static_cast<double>(acc);
  }
  return out;
}

inline double Soft(double y, double tau) {
  if (y > tau) return y - tau;
  if (y < -tau) return y + tau;
  return 0.0;
}

inline DenseVector Soft(const DenseVector& y, double tau) {
  DenseVector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = Soft(y(i), tau);
  return out;
}

inline double Norm2(const DenseVector& v) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += (long double)v(i) * v(i);
  return static_cast<double>(std::sqrt(acc));
}

// s_{t+1} = soft(M_t s_t + B_t x, tau_t) from s0.
inline std::vector<DenseVector> IstaIterates(const UnfoldedModel& model,
                                             const DenseVector& x) {
  std::vector<DenseVector> it{model.s0};
  for (const LayerParams& p : model.layers) {
    const DenseVector u = MatVec(p.m, it.back()) + MatVec(p.b, x);
    it.push_back(Soft(u, p.prox_tau));
  }
  return it;
}

// s <- M(v - y) + Bx; v <- soft(s + y); y <- y + mu (s - v), from zeros.
inline DenseVector AdmmOutput(const UnfoldedModel& model,
                              const DenseVector& x) {
  DenseVector s = model.s0;
  DenseVector v = DenseVector::Zero(s.size());
  DenseVector y = DenseVector::Zero(s.size());
  for (const LayerParams& p : model.layers) {
    s = MatVec(p.m, v - y) + MatVec(p.b, x);
    v = Soft(s + y, p.prox_tau);
    y = y + p.mu * (s - v);
  }
  return s;
}

inline DenseVector ModelOutput(const UnfoldedModel& model,
                               const DenseVector& x) {
  return model.kind == SolverKind::kProxGd ? IstaIterates(model, x).back()
                                           : AdmmOutput(model, x);
}

// 0.5 ||x - A s||^2 + rho ||s||_1, term by term.
inline double Lasso(const DenseMatrix& a, double rho, const DenseVector& x,
                    const DenseVector& s) {
  const DenseVector r = x - MatVec(a, s);
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) l1 += std::abs(s(i));
  return 0.5 * Norm2(r) * Norm2(r) + rho * l1;
}

// Central differences of f at x.
inline DenseVector NumericGradient(
    const std::function<double(const DenseVector&)>& f, DenseVector x,
    double h) {
  DenseVector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double fp = f(x);
    x(i) = keep - h;
    const double fm = f(x);
    x(i) = keep;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Random unfolded model around the classical initialization, with per-layer
// perturbations so that layers differ.
inline UnfoldedModel RandomModel(SolverKind kind, int n, int m, int T,
                                 std::mt19937_64& gen, double jitter = 0.05) {
  const DenseMatrix a = Gaussian(n, m, gen);
  const LassoObjective obj{a, 0.01};
  UnfoldedModel model = kind == SolverKind::kProxGd
                            ? InitClassicalPgd(obj, DefaultPgdStep(obj), T)
                            : InitClassicalAdmm(obj, 1.0, 1.0, T);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (LayerParams& p : model.layers) {
    p.m += jitter * Gaussian(m, m, gen) / std::sqrt(double(m));
    p.b += jitter * Gaussian(m, n, gen) / std::sqrt(double(n));
    p.prox_tau *= u(gen);
    if (kind == SolverKind::kAdmm) p.mu = u(gen);
  }
  return model;
}

}  // namespace advopt::oracle

#endif  // ADVOPT_TESTS_ORACLES_H_
