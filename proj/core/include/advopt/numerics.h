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

#ifndef ADVOPT_NUMERICS_H_
#define ADVOPT_NUMERICS_H_

// Dense real linear algebra and proximal primitives.
//
// Vectors are Eigen column vectors. Most of the library also accepts a
// DenseMatrix whose columns are independent samples ("batch"); the
// element-wise primitives below are written once for both.

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "advopt/errors.h"

namespace advopt {

using DenseVector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

// Soft-thresholding: sign(y) * max(|y| - tau, 0), element-wise.
template <typename Derived>
typename Derived::PlainObject ProxL1(const Eigen::MatrixBase<Derived>& y,
                                     double tau) {
  if (!(tau >= 0.0)) {
    throw InvalidArgument("prox_l1: tau must be >= 0, got " +
                          std::to_string(tau));
  }
  typename Derived::PlainObject out(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double v = y(i, j);
      const double mag = std::abs(v) - tau;
      out(i, j) = mag > 0.0 ? std::copysign(mag, v) : 0.0;
    }
  }
  return out;
}

// min(max(v, -eps), eps), element-wise.
template <typename Derived>
typename Derived::PlainObject ClipInf(const Eigen::MatrixBase<Derived>& v,
                                      double eps) {
  if (!(eps >= 0.0)) {
    throw InvalidArgument("clip_inf: eps must be >= 0");
  }
  return v.cwiseMax(-eps).cwiseMin(eps);
}

// Element-wise sign with sign(0) = 0.
template <typename Derived>
typename Derived::PlainObject SignVec(const Eigen::MatrixBase<Derived>& v) {
  return v.unaryExpr([](double a) {
    return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
  });
}

// Dense product a * v. Every forward map (plain and taped) goes through this
// so that the two paths produce bit-identical values.
DenseMatrix Apply(const DenseMatrix& a, const DenseMatrix& v);
DenseMatrix ApplyTransposed(const DenseMatrix& a, const DenseMatrix& v);

bool AllFinite(const DenseMatrix& m);

struct PowerIterationOptions {
  double tol = 1e-12;
  int max_iter = 20000;
};

// Largest singular value via power iteration on the smaller Gram matrix.
// The start vector is a fixed-seed pseudo-random unit vector, so results are
// reproducible. Throws ConvergenceError (carrying the last estimate) when the
// relative change of the estimate is still above tol after max_iter steps.
double SpectralNorm(const DenseMatrix& a, PowerIterationOptions opts = {});

struct SingularPair {
  DenseVector v;  // unit norm, first nonzero entry positive
  double sigma = 0.0;
};

// Top right singular vector of `a` (power iteration on A^T A, stopping on
// the change of the iterate) and sigma = ||A v||.
SingularPair TopRightSingularVector(const DenseMatrix& a,
                                    PowerIterationOptions opts = {1e-11,
                                                                  200000});

// Least-squares minimizer of ||x - A s||_2 via Cholesky of A^T A. Throws
// SingularMatrixError when the reciprocal condition estimate of A^T A is
// below kSingularRcond.
inline constexpr double kSingularRcond = 1e-12;
DenseVector SolveNormalEquations(const DenseMatrix& a, const DenseVector& x);

// (A^T A)^{-1} A^T, with the same singularity check.
DenseMatrix PseudoInverse(const DenseMatrix& a);

std::string ShapeString(const DenseMatrix& m);

}  // namespace advopt

#endif  // ADVOPT_NUMERICS_H_
