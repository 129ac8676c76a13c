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

#include "advopt/experiments.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "advopt/errors.h"
#include "advopt/rng.h"
#include "advopt/serialization.h"

namespace advopt {

namespace {

double MillisSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

AttackConfig AtGridPoint(const AttackConfig& tmpl, double value) {
  AttackConfig cfg = tmpl;
  if (cfg.kind == AttackKind::kCw) {
    cfg.c = value;
  } else {
    cfg.budget.eps = value;
  }
  return cfg;
}

GridKind KindOf(const std::vector<AttackConfig>& attacks) {
  const bool any_cw = std::any_of(attacks.begin(), attacks.end(), [](auto& a) {
    return a.kind == AttackKind::kCw;
  });
  return any_cw ? GridKind::kTradeoff : GridKind::kEpsilon;
}

const char* GridColumn(GridKind kind) {
  return kind == GridKind::kTradeoff ? "c" : "epsilon";
}

void CheckGrid(const std::vector<double>& grid, const char* what) {
  if (grid.empty()) throw InvalidArgument(std::string(what) + ": empty grid");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || grid[i] < 0.0) {
      throw InvalidArgument(std::string(what) +
                            ": grid values must be finite and >= 0");
    }
    if (i > 0 && grid[i] < grid[i - 1]) {
      throw InvalidArgument(std::string(what) + ": grid must be ascending");
    }
  }
}

// Mean and standard error of the mean (sample standard deviation / sqrt(n)).
std::pair<double, double> MeanStderr(const std::vector<double>& v) {
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

}  // namespace

int ResolveJobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void ParallelFor(int count, int jobs, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int workers = std::min(ResolveJobs(jobs), count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      if (stop.load()) return;
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        stop.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

Solver SolverSpec::Build(const DenseMatrix& a) const {
  LassoObjective obj{a, rho};
  obj.Validate();
  if (T == 0 && kind == SolverKind::kProxGd) {
    return Solver::ConvergentIsta(obj, DefaultPgdStep(obj), tol, max_iter);
  }
  const int layers = T > 0 ? T : 1;
  UnfoldedModel model = kind == SolverKind::kProxGd
                            ? InitClassicalPgd(obj, DefaultPgdStep(obj), layers)
                            : InitClassicalAdmm(obj, lambda, 1.0, layers);
  if (T > 0) return Solver::Fixed(std::move(model));
  return Solver::Convergent(std::move(model), tol, max_iter);
}

SolverSpec SolverSpec::Ista(double rho) {
  SolverSpec s;
  s.name = "ista";
  s.kind = SolverKind::kProxGd;
  s.rho = rho;
  return s;
}

SolverSpec SolverSpec::Admm(double rho, double lambda) {
  SolverSpec s;
  s.name = "admm";
  s.kind = SolverKind::kAdmm;
  s.rho = rho;
  s.lambda = lambda;
  return s;
}

GridKind ExperimentConfig::grid_kind() const { return KindOf(attacks); }

void ExperimentConfig::Validate() const {
  if (trials < 1) throw InvalidArgument("experiment: trials must be >= 1");
  if (attacks.empty()) throw InvalidArgument("experiment: no attacks");
  if (solvers.empty()) throw InvalidArgument("experiment: no solvers");
  CheckGrid(grid, "experiment");
  const bool any_cw = grid_kind() == GridKind::kTradeoff;
  for (const AttackConfig& a : attacks) {
    if ((a.kind == AttackKind::kCw) != any_cw) {
      throw InvalidArgument(
          "experiment: CW (c grid) cannot be mixed with radius-based attacks");
    }
  }
  for (const SolverSpec& s : solvers) {
    if (s.name.empty()) throw InvalidArgument("experiment: unnamed solver");
  }
  if (spec.k < 0 || spec.k > spec.m) {
    throw InvalidArgument("experiment: need 0 <= k <= m");
  }
}

std::vector<double> CurveResult::Curve(const std::string& attack,
                                       const std::string& solver) const {
  std::vector<double> out;
  for (const SummaryRow& r : summary) {
    if (r.attack == attack && r.solver == solver) out.push_back(r.mean_adv);
  }
  return out;
}

CurveResult DistortionCurve(const ExperimentConfig& cfg) {
  cfg.Validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n_grid = static_cast<int>(cfg.grid.size());
  const int n_solver = static_cast<int>(cfg.solvers.size());
  const int n_attack = static_cast<int>(cfg.attacks.size());
  const int per_trial = n_solver * n_attack;
  const int units = n_grid * cfg.trials;

  DenseMatrix shared_a;
  if (!cfg.redraw_matrix) {
    Rng rng(DeriveSeed(cfg.seed, kSharedMatrixStream));
    shared_a = DrawSensingMatrix(cfg.spec, rng);
  }

  CurveResult out;
  out.grid_kind = cfg.grid_kind();
  out.trials.resize(static_cast<size_t>(units) * per_trial);

  ParallelFor(units, cfg.jobs, [&](int unit) {
    const int j = unit / cfg.trials;
    const int i = unit % cfg.trials;
    const uint64_t seed = DeriveSeed(cfg.seed, static_cast<uint64_t>(i),
                                     static_cast<uint64_t>(j));
    TrialResult* slot = &out.trials[static_cast<size_t>(unit) * per_trial];
    for (int si = 0; si < n_solver; ++si) {
      for (int ai = 0; ai < n_attack; ++ai) {
        TrialResult& r = slot[si * n_attack + ai];
        r.trial = i;
        r.grid_index = j;
        r.epsilon = cfg.grid[j];
        r.seed = seed;
        r.attack = std::string(AttackKindName(cfg.attacks[ai].kind));
        r.solver = cfg.solvers[si].name;
      }
    }
    try {
      Rng rng(seed);
      const DenseMatrix a =
          cfg.redraw_matrix ? DrawSensingMatrix(cfg.spec, rng) : shared_a;
      const Pair pair = DrawPair(cfg.spec, a, rng);
      for (int si = 0; si < n_solver; ++si) {
        const auto ts = std::chrono::steady_clock::now();
        const Solver solver = cfg.solvers[si].Build(a);
        const DenseMatrix s_star = Infer(solver, pair.x);
        const double clean = (s_star - pair.s).norm();
        const double setup_ms = MillisSince(ts);
        for (int ai = 0; ai < n_attack; ++ai) {
          TrialResult& r = slot[si * n_attack + ai];
          const auto ta = std::chrono::steady_clock::now();
          try {
            const AttackConfig attack =
                AtGridPoint(cfg.attacks[ai], cfg.grid[j]);
            const DenseMatrix delta = RunAttack(solver, pair.x, pair.s, attack);
            r.distortion_clean = clean;
            r.distortion_adv =
                DistortionFromReference(solver, s_star, pair.x, delta)(0);
          } catch (const std::exception& e) {
            r.failed = true;
            r.failure = e.what();
          }
          r.runtime_ms = setup_ms + MillisSince(ta);
        }
      }
    } catch (const std::exception& e) {
      for (int k = 0; k < per_trial; ++k) {
        if (!slot[k].failed && slot[k].runtime_ms == 0.0) {
          slot[k].failed = true;
          slot[k].failure = e.what();
        }
      }
    }
  });

  for (int ai = 0; ai < n_attack; ++ai) {
    for (int si = 0; si < n_solver; ++si) {
      for (int j = 0; j < n_grid; ++j) {
        std::vector<double> adv, clean;
        int failures = 0;
        for (int i = 0; i < cfg.trials; ++i) {
          const TrialResult& r =
              out.trials[(static_cast<size_t>(j) * cfg.trials + i) * per_trial +
                         si * n_attack + ai];
          if (r.failed) {
            ++failures;
            continue;
          }
          adv.push_back(r.distortion_adv);
          clean.push_back(r.distortion_clean);
        }
        SummaryRow row;
        row.epsilon = cfg.grid[j];
        row.attack = std::string(AttackKindName(cfg.attacks[ai].kind));
        row.solver = cfg.solvers[si].name;
        std::tie(row.mean_adv, row.stderr_adv) = MeanStderr(adv);
        row.mean_clean = MeanStderr(clean).first;
        row.count = static_cast<int>(adv.size());
        row.failures = failures;
        out.summary.push_back(std::move(row));
      }
    }
  }
  out.runtime_ms = MillisSince(t0);
  return out;
}

std::string TrialsCsv(const CurveResult& r) {
  CsvTable t({"trial", "grid_index", GridColumn(r.grid_kind), "seed", "attack",
              "solver", "distortion_clean", "distortion_adv", "status"});
  for (const TrialResult& tr : r.trials) {
    t.Row()
        .Add(tr.trial)
        .Add(tr.grid_index)
        .Add(tr.epsilon)
        .Add(static_cast<unsigned long long>(tr.seed))
        .Add(tr.attack)
        .Add(tr.solver);
    if (tr.failed) {
      t.Add("nan").Add("nan").Add("failed");
    } else {
      t.Add(tr.distortion_clean).Add(tr.distortion_adv).Add("ok");
    }
  }
  return t.str();
}

std::string SummaryCsv(const CurveResult& r) {
  CsvTable t({GridColumn(r.grid_kind), "attack", "solver", "mean", "stderr",
              "mean_clean", "count", "failures"});
  for (const SummaryRow& s : r.summary) {
    t.Row()
        .Add(s.epsilon)
        .Add(s.attack)
        .Add(s.solver)
        .Add(s.mean_adv)
        .Add(s.stderr_adv)
        .Add(s.mean_clean)
        .Add(s.count)
        .Add(s.failures);
  }
  return t.str();
}

TrendReport CheckTrend(const std::vector<double>& values, int max_inversions,
                       double min_growth) {
  TrendReport rep;
  if (values.empty()) return rep;
  for (size_t i = 0; i + 1 < values.size(); ++i) {
    if (values[i + 1] < values[i]) ++rep.inversions;
  }
  rep.growth = values.back() / values.front();
  rep.ok = rep.inversions <= max_inversions &&
           values.back() >= min_growth * values.front();
  return rep;
}

const Solver& ModelFamily::At(size_t grid_index) const {
  if (solvers.empty()) throw InvalidArgument("family " + name + ": no solver");
  if (solvers.size() == 1) return solvers.front();
  if (grid_index >= solvers.size()) {
    throw InvalidArgument("family " + name + ": no solver for grid index " +
                          std::to_string(grid_index));
  }
  return solvers[grid_index];
}

namespace {

double Lookup(const std::vector<ComparisonRow>& rows, const std::string& model,
              size_t grid_index) {
  size_t seen = 0;
  for (const ComparisonRow& r : rows) {
    if (r.model != model) continue;
    if (seen++ == grid_index) return r.mean;
  }
  throw InvalidArgument("comparison: no row for " + model + " at index " +
                        std::to_string(grid_index));
}

}  // namespace

double ComparisonResult::Attacked(const std::string& model,
                                  size_t grid_index) const {
  return Lookup(attacked, model, grid_index);
}

double ComparisonResult::Clean(const std::string& model,
                               size_t grid_index) const {
  return Lookup(clean, model, grid_index);
}

ComparisonResult RobustnessComparison(const std::vector<ModelFamily>& families,
                                      const Dataset& test,
                                      const AttackConfig& attack,
                                      const std::vector<double>& grid,
                                      int jobs) {
  CheckGrid(grid, "comparison");
  if (families.empty()) throw InvalidArgument("comparison: no models");
  for (const ModelFamily& f : families) {
    if (f.solvers.size() != 1 && f.solvers.size() != grid.size()) {
      throw InvalidArgument("comparison: family " + f.name + " has " +
                            std::to_string(f.solvers.size()) +
                            " solvers for a grid of " +
                            std::to_string(grid.size()));
    }
    for (const Solver& s : f.solvers) {
      if (s.input_dim() != test.a.rows() || s.state_dim() != test.a.cols()) {
        throw ShapeError("comparison: family " + f.name +
                         " does not match the test data dimensions");
      }
    }
  }
  const size_t nf = families.size();
  const size_t ng = grid.size();
  std::vector<EvalResult> attacked(nf * ng), clean(nf * ng);
  ParallelFor(static_cast<int>(nf * ng), jobs, [&](int cell) {
    const size_t f = static_cast<size_t>(cell) / ng;
    const size_t g = static_cast<size_t>(cell) % ng;
    const Solver& solver = families[f].At(g);
    attacked[cell] = Evaluate(solver, test, AtGridPoint(attack, grid[g]));
    clean[cell] = Evaluate(solver, test);
  });

  ComparisonResult out;
  out.grid_kind = KindOf({attack});
  for (size_t f = 0; f < nf; ++f) {
    for (size_t g = 0; g < ng; ++g) {
      for (int pass = 0; pass < 2; ++pass) {
        const EvalResult& e = pass == 0 ? attacked[f * ng + g] : clean[f * ng + g];
        ComparisonRow row;
        row.epsilon = grid[g];
        row.model = families[f].name;
        std::tie(row.mean, row.stderr_) = MeanStderr(e.records);
        row.count = static_cast<int>(e.records.size());
        (pass == 0 ? out.attacked : out.clean).push_back(std::move(row));
      }
    }
  }
  return out;
}

std::string ComparisonCsv(const ComparisonResult& r, bool attacked) {
  CsvTable t({GridColumn(r.grid_kind), "model", "mean", "stderr", "count"});
  for (const ComparisonRow& row : attacked ? r.attacked : r.clean) {
    t.Row().Add(row.epsilon).Add(row.model).Add(row.mean).Add(row.stderr_).Add(
        row.count);
  }
  return t.str();
}

void DefenseConfig::Validate() const {
  if (T < 1) throw InvalidArgument("defense: T must be >= 1");
  if (train_count < 1 || test_count < 1) {
    throw InvalidArgument("defense: train and test counts must be >= 1");
  }
  CheckGrid(grid, "defense");
  attack.Validate();
  train.Validate();
}

std::string ClassicalName(SolverKind kind) {
  return kind == SolverKind::kProxGd ? "ista" : "admm";
}

std::string UnfoldedName(SolverKind kind) {
  return kind == SolverKind::kProxGd ? "lista" : "ladmm";
}

std::string RobustName(SolverKind kind) {
  return "robust_" + UnfoldedName(kind);
}

DefenseModels TrainDefenseModels(const DefenseConfig& cfg) {
  cfg.Validate();
  DefenseModels out;
  const Dataset all =
      GenCsDataset(cfg.spec, cfg.train_count + cfg.test_count, cfg.seed);
  std::vector<Eigen::Index> train_idx, test_idx;
  for (int i = 0; i < cfg.train_count; ++i) train_idx.push_back(i);
  for (int i = 0; i < cfg.test_count; ++i) {
    test_idx.push_back(cfg.train_count + i);
  }
  out.train = all.Subset(train_idx);
  out.test = all.Subset(test_idx);

  const LassoObjective obj{all.a, cfg.rho};
  obj.Validate();
  out.classical = cfg.kind == SolverKind::kProxGd
                      ? InitClassicalPgd(obj, DefaultPgdStep(obj), cfg.T)
                      : InitClassicalAdmm(obj, cfg.lambda, 1.0, cfg.T);

  // Training runs are independent given their seeds, so they share the pool.
  const size_t ng = cfg.grid.size();
  out.robust.resize(ng);
  ParallelFor(static_cast<int>(ng + 1), cfg.jobs, [&](int k) {
    TrainConfig tc = cfg.train;
    if (k == 0) {
      tc.adv.reset();
      out.standard = SupervisedTrain(out.classical, out.train, tc);
      return;
    }
    tc.adv = AtGridPoint(cfg.attack, cfg.grid[k - 1]);
    out.robust[k - 1] = AdversarialTrain(out.classical, out.train, tc);
  });
  return out;
}

DefenseResult RunDefense(const DefenseConfig& cfg) {
  DefenseResult out;
  static_cast<DefenseModels&>(out) = TrainDefenseModels(cfg);

  const SolverSpec classical_spec = cfg.kind == SolverKind::kProxGd
                                        ? SolverSpec::Ista(cfg.rho)
                                        : SolverSpec::Admm(cfg.rho, cfg.lambda);
  ModelFamily classical{ClassicalName(cfg.kind),
                        {classical_spec.Build(out.train.a)}};
  ModelFamily standard{UnfoldedName(cfg.kind),
                       {Solver::Fixed(out.standard.model)}};
  ModelFamily robust{RobustName(cfg.kind), {}};
  for (const TrainResult& r : out.robust) {
    robust.solvers.push_back(Solver::Fixed(r.model));
  }
  out.family_names = {classical.name, standard.name, robust.name};
  out.comparison = RobustnessComparison({classical, standard, robust}, out.test,
                                        cfg.attack, cfg.grid, cfg.jobs);
  return out;
}

std::vector<BoundRow> BoundStudy(const DefenseConfig& cfg,
                                 const std::vector<uint64_t>& seeds,
                                 std::vector<DefenseModels>* models) {
  cfg.Validate();
  if (seeds.empty()) throw InvalidArgument("bound study: no seeds");
  std::vector<std::vector<BoundRow>> per_seed(seeds.size());
  if (models) {
    models->clear();
    models->resize(seeds.size());
  }
  ParallelFor(static_cast<int>(seeds.size()), cfg.jobs, [&](int i) {
    DefenseConfig c = cfg;
    c.seed = seeds[i];
    c.train.seed = seeds[i];
    c.jobs = 1;
    DefenseModels trained = TrainDefenseModels(c);
    for (size_t g = 0; g < cfg.grid.size(); ++g) {
      per_seed[i].push_back(BoundComparison(trained.standard.model,
                                            trained.robust[g].model, seeds[i],
                                            cfg.grid[g]));
    }
    if (models) (*models)[i] = std::move(trained);
  });
  std::vector<BoundRow> rows;
  for (const auto& v : per_seed) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

BoundRow BoundComparison(const UnfoldedModel& standard,
                         const UnfoldedModel& robust, uint64_t seed,
                         double train_eps) {
  if (standard.kind != robust.kind) {
    throw InvalidArgument(std::string("bound: model kinds differ (") +
                          SolverKindName(standard.kind) + " vs " +
                          SolverKindName(robust.kind) + ")");
  }
  BoundRow row;
  row.seed = seed;
  row.train_eps = train_eps;
  row.c_standard = Certify(standard).c;
  row.c_robust = Certify(robust).c;
  row.ratio = row.c_robust / row.c_standard;
  return row;
}

std::string BoundCsv(const std::vector<BoundRow>& rows) {
  CsvTable t({"seed", "train_eps", "c_standard", "c_robust", "ratio"});
  for (const BoundRow& r : rows) {
    t.Row()
        .Add(static_cast<unsigned long long>(r.seed))
        .Add(r.train_eps)
        .Add(r.c_standard)
        .Add(r.c_robust)
        .Add(r.ratio);
  }
  return t.str();
}

}  // namespace advopt
