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

#ifndef ADVOPT_EXPERIMENTS_H_
#define ADVOPT_EXPERIMENTS_H_

// Monte Carlo experiment orchestration: attack-distortion curves for
// classical solvers, clean/attacked comparisons of classical, unfolded and
// adversarially trained models, and certificate ratios.
//
// Seeds. Trial `i` at grid index `j` draws its data from
// Rng(DeriveSeed(master, i, j)). With redraw_matrix the sensing matrix is the
// first draw of that stream; otherwise every trial shares the matrix drawn
// from Rng(DeriveSeed(master, kSharedMatrixStream)).
//
// Worker pools. Trials (or evaluation cells) run on `jobs` threads, each
// writing into its own preallocated slot. Results are emitted in index
// order, so outputs do not depend on the worker count.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "advopt/analysis.h"
#include "advopt/attacks.h"
#include "advopt/dataset.h"
#include "advopt/optimizers.h"
#include "advopt/training.h"

namespace advopt {

inline constexpr uint64_t kSharedMatrixStream = 0xA11CE5EEDULL;

// Iteration cap for convergent solvers in experiments. ISTA at the desk-scale
// defaults needs 1.5e4 to 3e4 iterations to reach tol = 1e-6.
inline constexpr int kExperimentMaxIter = 100000;

// Runs fn(0) .. fn(count - 1) on up to `jobs` threads (jobs <= 0 selects the
// hardware concurrency). The first exception thrown is rethrown after all
// workers stop.
void ParallelFor(int count, int jobs, const std::function<void(int)>& fn);
int ResolveJobs(int jobs);

// A classical solver built from the trial's sensing matrix.
struct SolverSpec {
  std::string name;  // "ista" or "admm" by default
  SolverKind kind = SolverKind::kProxGd;
  double rho = 0.01;
  double lambda = 1.0;  // ADMM only
  int T = 0;            // 0 iterates to convergence
  double tol = kDefaultTol;
  int max_iter = kExperimentMaxIter;

  Solver Build(const DenseMatrix& a) const;
  static SolverSpec Ista(double rho = 0.01);
  static SolverSpec Admm(double rho = 0.01, double lambda = 1.0);
};

enum class GridKind { kEpsilon, kTradeoff };

struct ExperimentConfig {
  DataSpec spec;
  int trials = 100;
  // Attack radii, or CW trade-off values when every attack is CW.
  std::vector<double> grid;
  // Templates; the grid value replaces budget.eps (or c for CW).
  std::vector<AttackConfig> attacks;
  std::vector<SolverSpec> solvers;
  uint64_t seed = 0;
  bool redraw_matrix = true;
  int jobs = 0;

  GridKind grid_kind() const;
  void Validate() const;  // grid ascending, non-empty lists, no CW mixing
};

struct TrialResult {
  int trial = 0;
  int grid_index = 0;
  double epsilon = 0.0;  // grid value (c for CW grids)
  uint64_t seed = 0;
  std::string attack;
  std::string solver;
  double distortion_clean = 0.0;  // ||f(x) - s||_2
  double distortion_adv = 0.0;    // ||f(x) - f(x + delta)||_2
  double runtime_ms = 0.0;        // attack plus solves; not written to CSVs
  bool failed = false;
  std::string failure;  // exception text when failed
};

struct SummaryRow {
  double epsilon = 0.0;
  std::string attack;
  std::string solver;
  double mean_adv = 0.0;
  double stderr_adv = 0.0;
  double mean_clean = 0.0;
  int count = 0;  // successful trials
  int failures = 0;
};

struct CurveResult {
  GridKind grid_kind = GridKind::kEpsilon;
  std::vector<TrialResult> trials;  // ordered by (grid, trial, solver, attack)
  std::vector<SummaryRow> summary;  // ordered by (attack, solver, grid)
  double runtime_ms = 0.0;

  // Per-grid means of the attacked distortion for one curve.
  std::vector<double> Curve(const std::string& attack,
                            const std::string& solver) const;
};

CurveResult DistortionCurve(const ExperimentConfig& cfg);

// trial,grid_index,<epsilon|c>,seed,attack,solver,distortion_clean,
// distortion_adv,status
std::string TrialsCsv(const CurveResult& r);
// <epsilon|c>,attack,solver,mean,stderr,mean_clean,count,failures
std::string SummaryCsv(const CurveResult& r);

struct TrendReport {
  int inversions = 0;  // i with values[i + 1] < values[i]
  double growth = 0.0;  // values.back() / values.front()
  bool ok = false;
};
// Non-decreasing up to `max_inversions` strict decreases, and
// values.back() >= min_growth * values.front().
TrendReport CheckTrend(const std::vector<double>& values, int max_inversions,
                       double min_growth);

// ---- Clean vs attacked comparison -----------------------------------------

// One column of the comparison. A family holds either a single solver used
// at every grid point or one solver per grid point (models trained at that
// radius).
struct ModelFamily {
  std::string name;
  std::vector<Solver> solvers;

  const Solver& At(size_t grid_index) const;
};

struct ComparisonRow {
  double epsilon = 0.0;
  std::string model;
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

struct ComparisonResult {
  GridKind grid_kind = GridKind::kEpsilon;
  std::vector<ComparisonRow> attacked;  // ordered by (model, grid)
  std::vector<ComparisonRow> clean;

  double Attacked(const std::string& model, size_t grid_index) const;
  double Clean(const std::string& model, size_t grid_index) const;
};

// Evaluates every family at every grid point on the same held-out pairs.
// Attacked rows report ||f(x) - f(x + delta)||_2, clean rows ||f(x) - s||_2.
ComparisonResult RobustnessComparison(const std::vector<ModelFamily>& families,
                                      const Dataset& test,
                                      const AttackConfig& attack,
                                      const std::vector<double>& grid,
                                      int jobs);

// <epsilon|c>,model,mean,stderr,count
std::string ComparisonCsv(const ComparisonResult& r, bool attacked);

// ---- Unfolded training protocol -------------------------------------------

struct DefenseConfig {
  DataSpec spec;
  SolverKind kind = SolverKind::kProxGd;
  int T = 5;
  double rho = 0.01;
  double lambda = 1.0;
  int train_count = 1000;
  int test_count = 200;
  // Training and evaluation radii (CW trade-offs when attack is CW).
  std::vector<double> grid;
  AttackConfig attack;  // template
  TrainConfig train;    // adv is filled per grid point
  uint64_t seed = 0;
  int jobs = 0;

  void Validate() const;
};

struct DefenseModels {
  Dataset train, test;
  UnfoldedModel classical;  // T-layer classical initialization
  TrainResult standard;
  std::vector<TrainResult> robust;  // one per grid value
};

struct DefenseResult : DefenseModels {
  ComparisonResult comparison;  // families: classical, unfolded, robust
  std::vector<std::string> family_names;
};

// Names used in the comparison: "ista"/"admm" (convergent classical),
// "lista"/"ladmm" (supervised unfolding), "robust_lista"/"robust_ladmm".
std::string ClassicalName(SolverKind kind);
std::string UnfoldedName(SolverKind kind);
std::string RobustName(SolverKind kind);

// Draws train and test sets from cfg.seed, then trains the unfolded model
// supervised and one adversarially trained model per grid value, each from
// the classical initialization with training seed cfg.train.seed.
DefenseModels TrainDefenseModels(const DefenseConfig& cfg);

// TrainDefenseModels followed by RobustnessComparison on the test set.
DefenseResult RunDefense(const DefenseConfig& cfg);

// ---- Certificate ratios ----------------------------------------------------

struct BoundRow {
  uint64_t seed = 0;
  double train_eps = 0.0;
  double c_standard = 0.0;
  double c_robust = 0.0;
  double ratio = 0.0;  // c_robust / c_standard
};

// Certifies both models with Certify(). Throws InvalidArgument when their
// kinds differ.
BoundRow BoundComparison(const UnfoldedModel& standard,
                         const UnfoldedModel& robust, uint64_t seed,
                         double train_eps);

// For every seed (used as both data and training seed), trains the
// standard and per-grid robust models and certifies them. Rows are ordered
// by (seed, grid). When `models` is given it receives the trained models,
// one entry per seed.
std::vector<BoundRow> BoundStudy(const DefenseConfig& cfg,
                                 const std::vector<uint64_t>& seeds,
                                 std::vector<DefenseModels>* models = nullptr);

// seed,train_eps,c_standard,c_robust,ratio
std::string BoundCsv(const std::vector<BoundRow>& rows);

}  // namespace advopt

#endif  // ADVOPT_EXPERIMENTS_H_
