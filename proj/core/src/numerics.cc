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

#include "advopt/numerics.h"

#include <cmath>
#include <string>

#include "advopt/rng.h"

namespace advopt {

namespace {

constexpr uint64_t kPowerIterationSeed = 0x5EEDC0FFEE123457ULL;

DenseVector StartVector(Eigen::Index dim) {
  Rng rng(kPowerIterationSeed);
  DenseVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.Uniform(-1.0, 1.0);
  return v / v.norm();
}

Eigen::LLT<DenseMatrix> FactorGram(const DenseMatrix& a) {
  if (a.rows() < a.cols()) {
    throw SingularMatrixError("normal equations: A is " + ShapeString(a) +
                              "; A^T A is rank deficient");
  }
  const DenseMatrix gram = a.transpose() * a;
  Eigen::LLT<DenseMatrix> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kSingularRcond)) {
    throw SingularMatrixError("normal equations: A^T A is singular (rcond " +
                              std::to_string(llt.rcond()) + ")");
  }
  return llt;
}

}  // namespace

std::string ShapeString(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

DenseMatrix Apply(const DenseMatrix& a, const DenseMatrix& v) {
  DenseMatrix out(a.rows(), v.cols());
  out.noalias() = a * v;
  return out;
}

DenseMatrix ApplyTransposed(const DenseMatrix& a, const DenseMatrix& v) {
  DenseMatrix out(a.cols(), v.cols());
  out.noalias() = a.transpose() * v;
  return out;
}

bool AllFinite(const DenseMatrix& m) { return m.allFinite(); }

double SpectralNorm(const DenseMatrix& a, PowerIterationOptions opts) {
  if (a.size() == 0) throw InvalidArgument("spectral_norm: empty matrix");
  const DenseMatrix gram = a.rows() < a.cols()
                               ? DenseMatrix(a * a.transpose())
                               : DenseMatrix(a.transpose() * a);
  DenseVector v = StartVector(gram.rows());
  DenseVector w = gram * v;
  double lambda = v.dot(w);
  for (int it = 0; it < opts.max_iter; ++it) {
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    w.noalias() = gram * v;
    const double next = v.dot(w);
    if (std::abs(next - lambda) <= opts.tol * std::abs(next)) {
      return std::sqrt(std::max(next, 0.0));
    }
    lambda = next;
  }
  const double estimate = std::sqrt(std::max(lambda, 0.0));
  throw ConvergenceError("spectral_norm: no convergence in " +
                             std::to_string(opts.max_iter) + " iterations",
                         estimate);
}

SingularPair TopRightSingularVector(const DenseMatrix& a,
                                    PowerIterationOptions opts) {
  if (a.size() == 0) {
    throw InvalidArgument("top_right_singular_vector: empty matrix");
  }
  const DenseMatrix gram = a.transpose() * a;
  DenseVector v = StartVector(gram.rows());
  bool converged = false;
  for (int it = 0; it < opts.max_iter; ++it) {
    DenseVector w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      // Zero matrix: every unit vector is a top singular vector.
      converged = true;
      break;
    }
    w /= norm;
    const double change = (w - v).norm();
    v = std::move(w);
    if (change <= opts.tol) {
      converged = true;
      break;
    }
  }
  SingularPair out;
  out.sigma = (a * v).norm();
  if (!converged) {
    throw ConvergenceError("top_right_singular_vector: no convergence in " +
                               std::to_string(opts.max_iter) + " iterations",
                           out.sigma);
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) != 0.0) {
      if (v(i) < 0.0) v = -v;
      break;
    }
  }
  out.v = std::move(v);
  return out;
}

DenseVector SolveNormalEquations(const DenseMatrix& a, const DenseVector& x) {
  if (x.size() != a.rows()) {
    throw ShapeError("solve_normal_equations: A is " + ShapeString(a) +
                     " but x has length " + std::to_string(x.size()));
  }
  return FactorGram(a).solve(a.transpose() * x);
}

DenseMatrix PseudoInverse(const DenseMatrix& a) {
  return FactorGram(a).solve(a.transpose());
}

}  // namespace advopt
