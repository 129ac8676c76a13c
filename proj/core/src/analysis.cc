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

#include "advopt/analysis.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "advopt/rng.h"

namespace advopt {

namespace {

struct LayerNorms {
  std::vector<double> m, b;
};

LayerNorms ComputeNorms(const UnfoldedModel& model) {
  model.Validate();
  LayerNorms n;
  for (const LayerParams& p : model.layers) {
    n.m.push_back(SpectralNorm(p.m));
    n.b.push_back(SpectralNorm(p.b));
  }
  return n;
}

void RequireKind(const UnfoldedModel& model, SolverKind kind,
                 const char* who) {
  if (model.kind != kind) {
    throw InvalidArgument(std::string(who) + ": model kind is " +
                          SolverKindName(model.kind) + ", expected " +
                          SolverKindName(kind));
  }
}

DenseVector RandomUnit(Eigen::Index dim, Rng& rng) {
  DenseVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.Normal();
  return v / v.norm();
}

// Random unit vector orthogonal to every vector in `basis` (orthonormal).
DenseVector RandomOrthogonal(Eigen::Index dim,
                             const std::vector<DenseVector>& basis,
                             Rng& rng) {
  for (;;) {
    DenseVector v = RandomUnit(dim, rng);
    for (const DenseVector& q : basis) v -= v.dot(q) * q;
    const double norm = v.norm();
    if (norm > 1e-8) return v / norm;
  }
}

}  // namespace

std::string_view CertificateMethodName(CertificateMethod m) {
  switch (m) {
    case CertificateMethod::kPgdClosed: return "pgd_closed";
    case CertificateMethod::kPgdRecursive: return "pgd_recursive";
    case CertificateMethod::kAdmmClosed: return "admm_closed";
    case CertificateMethod::kAdmmRecursive: return "admm_recursive";
  }
  return "unknown";
}

WorstCaseDelta LsWorstCaseDelta(const DenseMatrix& a, double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("ls_worst_case_delta: eps < 0");
  const DenseMatrix pinv = PseudoInverse(a);
  const SingularPair top = TopRightSingularVector(pinv);
  WorstCaseDelta out;
  out.sigma = top.sigma;
  out.delta = eps * top.v;
  const DenseVector s_clean = SolveNormalEquations(a, DenseVector::Zero(a.rows()));
  const DenseVector s_adv = SolveNormalEquations(a, out.delta);
  out.achieved_shift = (s_adv - s_clean).norm();
  out.squared_shift = out.achieved_shift * out.achieved_shift;
  return out;
}

LipschitzCertificate LipschitzPgd(const UnfoldedModel& model) {
  RequireKind(model, SolverKind::kProxGd, "lipschitz_pgd");
  const LayerNorms n = ComputeNorms(model);
  const int T = model.T();
  LipschitzCertificate cert;
  cert.method = CertificateMethod::kPgdClosed;
  for (int t = 0; t < T; ++t) {
    double prod = 1.0;
    for (int j = t + 1; j < T; ++j) prod *= n.m[j];
    const double term = prod * n.b[t];
    cert.per_layer_terms.push_back(term);
    cert.c += term;
  }
  return cert;
}

LipschitzCertificate LipschitzPgdRecursive(const UnfoldedModel& model) {
  RequireKind(model, SolverKind::kProxGd, "lipschitz_pgd_recursive");
  const LayerNorms n = ComputeNorms(model);
  LipschitzCertificate cert;
  cert.method = CertificateMethod::kPgdRecursive;
  double c = 0.0;
  for (int t = 0; t < model.T(); ++t) {
    c = n.m[t] * c + n.b[t];
    cert.per_layer_terms.push_back(c);
  }
  cert.c = c;
  return cert;
}

LipschitzCertificate LipschitzAdmmRecursive(const UnfoldedModel& model) {
  RequireKind(model, SolverKind::kAdmm, "lipschitz_admm_recursive");
  const LayerNorms n = ComputeNorms(model);
  LipschitzCertificate cert;
  cert.method = CertificateMethod::kAdmmRecursive;
  double ds = 0.0, dv = 0.0, dy = 0.0;
  for (int t = 0; t < model.T(); ++t) {
    const double mu = std::abs(model.layers[t].mu);
    const double ds_next = n.m[t] * (dy + dv) + n.b[t];
    const double dv_next = ds_next + dy;
    const double dy_next = mu * (2.0 * ds_next + dy);
    ds = ds_next;
    dv = dv_next;
    dy = dy_next;
    cert.per_layer_terms.push_back(ds);
  }
  cert.c = ds;
  return cert;
}

LipschitzCertificate LipschitzAdmmClosed(const UnfoldedModel& model) {
  RequireKind(model, SolverKind::kAdmm, "lipschitz_admm_closed");
  const LayerNorms n = ComputeNorms(model);
  const int T = model.T() - 1;  // layers are indexed 0..T
  auto mu_abs = [&](int j) { return std::abs(model.layers[j].mu); };
  const double b_star = *std::max_element(n.b.begin(), n.b.end());
  const double m_last = n.m[T];
  const double mu_prev = T - 1 >= 0 ? mu_abs(T - 1) : 0.0;
  LipschitzCertificate cert;
  cert.method = CertificateMethod::kAdmmClosed;
  double prod = 1.0;
  for (int i = 0; i <= T; ++i) {
    double mu_prod = 1.0;
    for (int j = std::max(i - 1, 0); j <= T - 2; ++j) mu_prod *= mu_abs(j);
    const double w = 2.0 * m_last * (mu_prev + 1.0) * mu_prod;
    cert.per_layer_terms.push_back(w);
    prod *= 1.0 + w;
  }
  cert.c = b_star * prod;
  return cert;
}

LipschitzCertificate SafeAdmmCertificate(const UnfoldedModel& model) {
  LipschitzCertificate closed = LipschitzAdmmClosed(model);
  LipschitzCertificate recursive = LipschitzAdmmRecursive(model);
  return closed.c >= recursive.c ? closed : recursive;
}

LipschitzCertificate Certify(const UnfoldedModel& model) {
  return model.kind == SolverKind::kProxGd ? LipschitzPgd(model)
                                           : SafeAdmmCertificate(model);
}

double BudgetToL2(const AttackBudget& budget, int n) {
  budget.Validate();
  if (n < 1) throw InvalidArgument("budget_to_l2: n must be >= 1");
  if (budget.p <= 2.0) return budget.eps;
  const double exponent = std::isinf(budget.p) ? 0.5 : 0.5 - 1.0 / budget.p;
  return std::pow(static_cast<double>(n), exponent) * budget.eps;
}

DominationReport CheckDomination(const UnfoldedModel& model, double c,
                                 int pairs, uint64_t seed,
                                 double input_scale) {
  Rng rng(seed);
  const Eigen::Index n = model.input_dim();
  DenseMatrix x1(n, pairs), x2(n, pairs);
  for (int k = 0; k < pairs; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) x1(i, k) = rng.Normal(0.0, input_scale);
    const double spread = (k % 2 == 0) ? input_scale : 0.01 * input_scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      x2(i, k) = (k % 2 == 0 ? 0.0 : x1(i, k)) + rng.Normal(0.0, spread);
    }
  }
  const DenseMatrix f1 = UnfoldForward(model, x1).output;
  const DenseMatrix f2 = UnfoldForward(model, x2).output;
  DominationReport rep;
  rep.pairs = pairs;
  for (int k = 0; k < pairs; ++k) {
    const double dout = (f1.col(k) - f2.col(k)).norm();
    const double din = (x1.col(k) - x2.col(k)).norm();
    if (din == 0.0) continue;
    rep.max_ratio = std::max(rep.max_ratio, dout / din);
    if (dout > c * din * (1.0 + 1e-9)) ++rep.violations;
  }
  return rep;
}

SurfaceGrid ComputeSurfaceGrid(const LassoObjective& obj, const DenseVector& x,
                               const DenseVector& center,
                               const SurfaceOptions& opts) {
  if (opts.resolution < 2) {
    throw InvalidArgument("surface_grid: resolution must be >= 2");
  }
  if (!(opts.half_width > 0.0)) {
    throw InvalidArgument("surface_grid: half_width must be > 0");
  }
  const Eigen::Index dim = center.size();
  if (dim != obj.state_dim() || x.size() != obj.input_dim()) {
    throw ShapeError("surface_grid: center/x do not match the objective");
  }
  if (dim < 2) throw InvalidArgument("surface_grid: need state_dim >= 2");
  if (opts.delta && opts.delta->size() != x.size()) {
    throw ShapeError("surface_grid: delta length mismatch");
  }

  SurfaceGrid grid;
  grid.center = center;
  Rng rng(opts.seed);
  std::vector<DenseVector> basis;
  if (opts.mode == DirectionMode::kTrajectoryPca) {
    if (opts.trajectory.empty()) {
      throw InvalidArgument("surface_grid: trajectory-pca needs iterates");
    }
    DenseMatrix rows(static_cast<Eigen::Index>(opts.trajectory.size()), dim);
    for (size_t i = 0; i < opts.trajectory.size(); ++i) {
      if (opts.trajectory[i].size() != dim) {
        throw ShapeError("surface_grid: iterate " + std::to_string(i) +
                         " has the wrong length");
      }
      rows.row(static_cast<Eigen::Index>(i)) = opts.trajectory[i].transpose();
    }
    const DenseMatrix centered = rows.rowwise() - rows.colwise().mean();
    Eigen::JacobiSVD<DenseMatrix> svd(centered, Eigen::ComputeThinV);
    const DenseVector sv = svd.singularValues();
    const double top = sv.size() > 0 ? sv(0) : 0.0;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, sv.size()); ++k) {
      if (top > 0.0 && sv(k) > 1e-12 * top) {
        basis.push_back(svd.matrixV().col(k).normalized());
      }
    }
  }
  if (opts.mode == DirectionMode::kTrajectoryPca && basis.size() < 2) {
    grid.fallback = true;
  }
  while (basis.size() < 2) basis.push_back(RandomOrthogonal(dim, basis, rng));
  grid.d1 = basis[0];
  grid.d2 = basis[1];

  const int res = opts.resolution;
  grid.coords.resize(res);
  for (int i = 0; i < res; ++i) {
    // Exact zero at the middle index for odd resolutions.
    grid.coords[i] = opts.half_width * static_cast<double>(2 * i - (res - 1)) /
                     static_cast<double>(res - 1);
  }
  const DenseVector zero_delta = DenseVector::Zero(x.size());
  const DenseVector& delta = opts.delta ? *opts.delta : zero_delta;
  grid.values.resize(res, res);
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const DenseVector point =
          center + grid.coords[i] * grid.d1 + grid.coords[j] * grid.d2;
      grid.values(i, j) = opts.delta
                              ? AdversarialObjectiveValue(obj, x, delta, point)
                              : ObjectiveValue(obj, x, point);
    }
  }
  grid.trajectory_2d = ProjectOntoGrid(grid, opts.trajectory);
  return grid;
}

std::vector<std::pair<double, double>> ProjectOntoGrid(
    const SurfaceGrid& grid, const std::vector<DenseVector>& points) {
  std::vector<std::pair<double, double>> out;
  out.reserve(points.size());
  for (const DenseVector& s : points) {
    if (s.size() != grid.center.size()) {
      throw ShapeError("project_onto_grid: point length mismatch");
    }
    const DenseVector rel = s - grid.center;
    out.emplace_back(rel.dot(grid.d1), rel.dot(grid.d2));
  }
  return out;
}

}  // namespace advopt
