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

#include "cli.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "advopt/analysis.h"
#include "advopt/attacks.h"
#include "advopt/dataset.h"
#include "advopt/errors.h"
#include "advopt/experiments.h"
#include "advopt/optimizers.h"
#include "advopt/serialization.h"
#include "advopt/training.h"
#include "json.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace advopt::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutDirEnv = "ADVOPT_OUT_DIR";
constexpr const char* kDefaultEpsRange = "0.005:0.085:0.01";
const std::vector<double> kDefaultTradeoffs = {1e-5, 1e-4, 1e-3,
                                               1e-2, 1e-1, 1.0};
const std::vector<double> kDefenseEps = {0.005, 0.025, 0.045, 0.065, 0.085};
const std::vector<double> kBoundEps = {0.025, 0.045, 0.065};

// Bad flag values or combinations: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  // Common.
  int verbose = 0;
  int jobs = 0;
  std::string out;

  // Data.
  std::string data;
  int n = 64, m = 256, k = 3, count = 100;
  double matrix_std = 1.0, signal_std = 0.5, noise_std = 0.01;
  uint64_t seed = 0;

  // Solver.
  std::string solver = "ista";
  std::string model;
  double rho = 0.01;
  double lambda = 1.0;
  double tol = kDefaultTol;
  int max_iter = kExperimentMaxIter;

  // Attack.
  std::string attack = "bim";
  std::vector<std::string> eps;
  std::vector<std::string> c;
  int steps = 0;
  double alpha = 0.0;
  double decay = 1.0;
  double cw_lr = 1e-2;

  // Training.
  std::string kind = "pgd";
  int T = 0;
  std::string init;
  int epochs = 50;
  int batch_size = 32;
  double lr = 3e-4;  // 1e-3 diverges mid-run on the 64 x 256 defaults
  std::string optimizer = "adam";
  double val_fraction = 0.1;
  bool no_keep_best = false;
  std::string history;

  // eval-curve.
  int trials = 100;
  std::string attacks = "bim,nifgsm";
  std::string solvers = "ista,admm";
  bool shared_matrix = false;

  // bound.
  std::string standard;
  std::vector<std::string> robust;
  std::vector<double> train_eps;

  // surface.
  int index = 0;
  std::string mode = "random";
  double half_width = 1.0;
  int resolution = 21;

  // reproduce.
  std::string target;
  int train_count = 1000;
  int test_count = 200;
  int seeds = 5;
  int train_steps = 0;
  double train_c = 1e-2;
  // reproduce binds its own defaults and copies them over after parsing.
  uint64_t rep_seed = 7;
  double rep_half_width = 0.0;
  int rep_resolution = 41;
};

// ---- Small helpers ---------------------------------------------------------

double RoundGridValue(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

double ParseNumber(const std::string& s, const std::string& flag) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw UsageError(flag + ": not a number: '" + s + "'");
  }
  return v;
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Expands repeated values, comma lists and lo:hi:step ranges (hi inclusive).
std::vector<double> ParseGrid(const std::vector<std::string>& raw,
                              const std::string& flag) {
  std::vector<double> grid;
  for (const std::string& item : raw) {
    for (const std::string& tok : Split(item, ',')) {
      if (tok.empty()) throw UsageError(flag + ": empty value");
      if (tok.find(':') == std::string::npos) {
        grid.push_back(RoundGridValue(ParseNumber(tok, flag)));
        continue;
      }
      const std::vector<std::string> r = Split(tok, ':');
      if (r.size() != 3) {
        throw UsageError(flag + ": range must be lo:hi:step, got '" + tok +
                         "'");
      }
      const double lo = ParseNumber(r[0], flag);
      const double hi = ParseNumber(r[1], flag);
      const double step = ParseNumber(r[2], flag);
      if (step <= 0.0 || hi < lo) {
        throw UsageError(flag + ": range needs lo <= hi and step > 0");
      }
      const long long count =
          static_cast<long long>(std::floor((hi - lo) / step + 1e-9)) + 1;
      if (count > 100000) throw UsageError(flag + ": range too long");
      for (long long i = 0; i < count; ++i) {
        grid.push_back(RoundGridValue(lo + static_cast<double>(i) * step));
      }
    }
  }
  for (size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) {
      throw UsageError(flag + ": values must be strictly ascending");
    }
  }
  for (double v : grid) {
    if (v < 0.0) throw UsageError(flag + ": values must be >= 0");
  }
  return grid;
}

std::string GridLabel(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

DataSpec SpecFromFlags(const Options& o) {
  DataSpec spec;
  spec.n = o.n;
  spec.m = o.m;
  spec.k = o.k;
  spec.matrix_std = o.matrix_std;
  spec.signal_std = o.signal_std;
  spec.noise_std = o.noise_std;
  return spec;
}

SolverKind KindFromFlag(const std::string& kind) {
  return kind == "admm" ? SolverKind::kAdmm : SolverKind::kProxGd;
}

int DefaultT(SolverKind kind) { return kind == SolverKind::kAdmm ? 6 : 5; }

int AttackSteps(AttackKind kind, int steps) {
  if (steps > 0) return steps;
  return kind == AttackKind::kCw ? 100 : 10;
}

int TrainAttackSteps(AttackKind kind, int steps) {
  if (steps > 0) return steps;
  return kind == AttackKind::kCw ? 20 : 10;
}

// Template whose radius (or trade-off) is `value`.
AttackConfig MakeAttack(AttackKind kind, double value, int steps,
                        const Options& o) {
  AttackConfig cfg;
  cfg.kind = kind;
  cfg.steps = steps;
  cfg.decay = o.decay;
  cfg.cw_lr = o.cw_lr;
  if (kind == AttackKind::kCw) {
    cfg.c = value;
  } else {
    cfg.budget.eps = value;
    cfg.alpha = o.alpha;
  }
  cfg.Validate();
  return cfg;
}

Json AttackJson(const AttackConfig& a) {
  Json j;
  j["kind"] = std::string(AttackKindName(a.kind));
  j["steps"] = a.steps;
  if (a.kind == AttackKind::kCw) {
    j["c"] = a.c;
    j["cw_lr"] = a.cw_lr;
  } else {
    j["eps"] = a.budget.eps;
    j["alpha"] = a.EffectiveAlpha();
    j["norm"] = "inf";
    if (a.kind == AttackKind::kNifgsm) j["decay"] = a.decay;
  }
  return j;
}

double ColumnNorm(const DenseMatrix& m) { return m.norm(); }

std::vector<DenseVector> ToVectors(const std::vector<DenseMatrix>& ms) {
  std::vector<DenseVector> out;
  out.reserve(ms.size());
  for (const DenseMatrix& m : ms) out.emplace_back(m.col(0));
  return out;
}

std::string HistoryCsv(const TrainResult& r) {
  CsvTable t({"epoch", "train_loss", "val_loss"});
  t.Row().Add(0).Add(r.initial_train_loss).Add(r.initial_val_loss);
  for (const EpochRecord& e : r.history) {
    t.Row().Add(e.epoch).Add(e.train_loss).Add(e.val_loss);
  }
  return t.str();
}

// ---- Invocation context ----------------------------------------------------

class Context {
 public:
  Context(const Options& o, const CLI::App& sub, std::ostream& err)
      : o_(o), sub_(sub), err_(err),
        start_(std::chrono::steady_clock::now()) {
    config_["command"] = sub.get_name();
    config_["version"] = kVersion;
    config_["options"] = ResolvedOptions(sub);
  }

  const Options& o() const { return o_; }
  Json& resolved() { return config_["resolved"]; }

  void Log(int level, const std::string& msg) {
    if (o_.verbose >= level) err_ << "advopt: " << msg << "\n";
  }

  void PrintConfig() { err_ << "config " << config_.dump() << "\n"; }

  // --out, or $ADVOPT_OUT_DIR/<fallback> when --out is omitted.
  fs::path OutPath(const std::string& fallback) const {
    if (!o_.out.empty()) return fs::path(o_.out);
    const char* env = std::getenv(kOutDirEnv);
    if (env != nullptr && *env != '\0') return fs::path(env) / fallback;
    throw UsageError("--out is required (or set " + std::string(kOutDirEnv) +
                     ")");
  }

  // Buffers a result; nothing touches disk before Commit.
  void Emit(const fs::path& path, std::string contents) {
    outputs_.emplace_back(path, std::move(contents));
  }

  void Commit(const fs::path& manifest) {
    Json files = Json::array();
    for (const auto& [path, contents] : outputs_) {
      files.push_back({{"path", path.string()}, {"bytes", contents.size()}});
    }
    Json m;
    m["command"] = config_["command"];
    m["version"] = kVersion;
    m["config"] = config_;
    m["outputs"] = files;
    m["runtime_s"] = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start_)
                         .count();
    outputs_.emplace_back(manifest, m.dump(2) + "\n");
    for (const auto& [path, contents] : outputs_) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      WriteFileAtomic(path, contents);
    }
    for (const auto& [path, contents] : outputs_) {
      Log(1, "wrote " + path.string());
    }
  }

  void CommitFile(const fs::path& out) {
    Commit(fs::path(out.string() + ".manifest.json"));
  }
  void CommitDir(const fs::path& dir) { Commit(dir / "manifest.json"); }

 private:
  static Json ResolvedOptions(const CLI::App& sub) {
    Json j = Json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      std::string name = opt->get_lnames().empty() ? opt->get_name()
                                                   : opt->get_lnames().front();
      if (name == "help") continue;
      if (opt->get_type_size() == 0) {
        j[name] = opt->count();
      } else if (opt->count() > 0) {
        const auto& r = opt->results();
        j[name] = r.size() == 1 ? Json(r.front()) : Json(r);
      } else {
        j[name] = opt->get_default_str();
      }
    }
    return j;
  }

  const Options& o_;
  const CLI::App& sub_;
  std::ostream& err_;
  std::chrono::steady_clock::time_point start_;
  Json config_;
  std::vector<std::pair<fs::path, std::string>> outputs_;
};

Solver SolverFromFlags(Context& ctx, const Dataset& data) {
  const Options& o = ctx.o();
  if (!o.model.empty()) {
    UnfoldedModel model = LoadModel(o.model);
    if (model.input_dim() != data.a.rows() ||
        model.state_dim() != data.a.cols()) {
      throw ShapeError("model " + o.model + " expects inputs of size " +
                       std::to_string(model.input_dim()) + " and states of " +
                       std::to_string(model.state_dim()) +
                       ", data has A " + ShapeString(data.a));
    }
    ctx.resolved()["solver"] = {{"model", o.model},
                                {"kind", SolverKindName(model.kind)},
                                {"T", model.T()}};
    return Solver::Fixed(std::move(model));
  }
  SolverSpec spec = o.solver == "admm" ? SolverSpec::Admm(o.rho, o.lambda)
                                       : SolverSpec::Ista(o.rho);
  spec.tol = o.tol;
  spec.max_iter = o.max_iter;
  Solver solver = spec.Build(data.a);
  ctx.resolved()["solver"] = {{"name", spec.name},
                              {"rho", spec.rho},
                              {"tol", spec.tol},
                              {"max_iter", spec.max_iter}};
  if (spec.kind == SolverKind::kAdmm) {
    ctx.resolved()["solver"]["lambda"] = spec.lambda;
  } else {
    ctx.resolved()["solver"]["mu"] = solver.model.layers[0].mu;
  }
  return solver;
}

// s_0 .. s_final for one input column.
std::vector<DenseVector> SolverTrajectory(const Solver& solver,
                                          const DenseVector& x) {
  if (!solver.convergent) return ToVectors(UnfoldForward(solver.model, x).iterates);
  return RunToConvergence(solver.model, x, solver.tol, solver.max_iter, true)
      .iterates;
}

// ---- Subcommands -----------------------------------------------------------

void CmdGenData(Context& ctx) {
  const Options& o = ctx.o();
  const fs::path out = ctx.OutPath("dataset.json");
  ctx.PrintConfig();
  const Dataset data = GenCsDataset(SpecFromFlags(o), o.count, o.seed);
  ctx.Emit(out, DatasetToJson(data));
  ctx.CommitFile(out);
}

void CmdSolve(Context& ctx) {
  const Options& o = ctx.o();
  const fs::path out = ctx.OutPath("solve.csv");
  const Dataset data = LoadDataset(o.data);
  const Solver solver = SolverFromFlags(ctx, data);
  const int jobs = ResolveJobs(o.jobs);
  ctx.resolved()["jobs"] = jobs;
  ctx.PrintConfig();

  const LassoObjective obj{data.a, o.rho};
  const int count = static_cast<int>(data.count());
  std::vector<ConvergenceResult> res(count);
  ParallelFor(count, jobs, [&](int j) {
    const DenseVector x = data.x.col(j);
    if (!solver.convergent) {
      res[j].s = UnfoldForward(solver.model, x).output.col(0);
      res[j].iterations = solver.model.T();
    } else if (solver.objective) {
      res[j] = RunFactoredIsta(*solver.objective, solver.model.layers[0].mu, x,
                               solver.tol, solver.max_iter);
    } else {
      res[j] = RunToConvergence(solver.model, x, solver.tol, solver.max_iter);
    }
  });

  CsvTable t({"index", "iterations", "converged", "objective",
              "recovery_error"});
  int unconverged = 0;
  for (int j = 0; j < count; ++j) {
    const char* conv =
        !solver.convergent ? "fixed" : (res[j].converged ? "true" : "false");
    if (solver.convergent && !res[j].converged) ++unconverged;
    t.Row()
        .Add(j)
        .Add(res[j].iterations)
        .Add(conv)
        .Add(ObjectiveValue(obj, data.x.col(j), res[j].s))
        .Add((res[j].s - data.s.col(j)).norm());
  }
  if (unconverged > 0) {
    ctx.Log(0, std::to_string(unconverged) + " of " + std::to_string(count) +
                   " inputs hit --max-iter before --tol");
  }
  ctx.Emit(out, t.str());
  ctx.CommitFile(out);
}

void CmdAttack(Context& ctx) {
  const Options& o = ctx.o();
  const fs::path out = ctx.OutPath("attack.csv");
  const AttackKind kind = ParseAttackKind(o.attack);
  const bool cw = kind == AttackKind::kCw;
  const std::vector<double> values =
      cw ? ParseGrid(o.c.empty() ? std::vector<std::string>{"0.01"} : o.c,
                     "--c")
         : ParseGrid(o.eps, "--eps");
  if (values.size() != 1) {
    throw UsageError(std::string(cw ? "--c" : "--eps") +
                     ": attack takes exactly one value");
  }
  const AttackConfig attack =
      MakeAttack(kind, values.front(), AttackSteps(kind, o.steps), o);
  const Dataset data = LoadDataset(o.data);
  const Solver solver = SolverFromFlags(ctx, data);
  const int jobs = ResolveJobs(o.jobs);
  ctx.resolved()["attack"] = AttackJson(attack);
  ctx.resolved()["jobs"] = jobs;
  ctx.PrintConfig();

  struct Row {
    double clean, adv, linf, l2, loss_clean, loss_adv;
  };
  const int count = static_cast<int>(data.count());
  std::vector<Row> rows(count);
  ParallelFor(count, jobs, [&](int j) {
    const DenseMatrix x = data.x.col(j);
    const DenseMatrix s = data.s.col(j);
    const DenseMatrix delta = RunAttack(solver, x, s, attack);
    const DenseMatrix fx = Infer(solver, x);
    const DenseMatrix fa = Infer(solver, x + delta);
    rows[j] = {ColumnNorm(fx - s),
               ColumnNorm(fx - fa),
               delta.cwiseAbs().maxCoeff(),
               delta.norm(),
               (fx - s).squaredNorm(),
               (fa - s).squaredNorm()};
  });

  CsvTable t({"index", "distortion_clean", "distortion_adv", "delta_linf",
              "delta_l2", "loss_clean", "loss_adv"});
  double mean = 0.0;
  for (int j = 0; j < count; ++j) {
    const Row& r = rows[j];
    t.Row().Add(j).Add(r.clean).Add(r.adv).Add(r.linf).Add(r.l2).Add(
        r.loss_clean).Add(r.loss_adv);
    mean += r.adv / count;
  }
  ctx.Log(0, "mean distortion_adv " + FormatDouble(mean));
  ctx.Emit(out, t.str());
  ctx.CommitFile(out);
}

TrainConfig TrainFromFlags(const Options& o) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.lr = o.lr;
  tc.optimizer = o.optimizer == "sgd" ? UpdateRule::kPlainGradient
                                      : UpdateRule::kAdaptiveMoments;
  tc.seed = o.seed;
  tc.val_fraction = o.val_fraction;
  tc.keep_best = !o.no_keep_best;
  return tc;
}

Json TrainJson(const TrainConfig& tc) {
  Json j;
  j["epochs"] = tc.epochs;
  j["batch_size"] = tc.batch_size;
  j["lr"] = tc.lr;
  j["optimizer"] =
      tc.optimizer == UpdateRule::kPlainGradient ? "sgd" : "adam";
  j["seed"] = tc.seed;
  j["val_fraction"] = tc.val_fraction;
  j["keep_best"] = tc.keep_best;
  if (tc.adv) j["adv"] = AttackJson(*tc.adv);
  return j;
}

void CmdTrain(Context& ctx, bool adversarial) {
  const Options& o = ctx.o();
  const fs::path out = ctx.OutPath("model.json");
  TrainConfig tc = TrainFromFlags(o);
  if (adversarial) {
    const AttackKind kind = ParseAttackKind(o.attack);
    const bool cw = kind == AttackKind::kCw;
    const std::vector<double> values =
        cw ? ParseGrid(o.c.empty() ? std::vector<std::string>{"0.01"} : o.c,
                       "--c")
           : ParseGrid(o.eps, "--eps");
    if (values.size() != 1) {
      throw UsageError(std::string(cw ? "--c" : "--eps") +
                       ": adv-train takes exactly one value");
    }
    tc.adv = MakeAttack(kind, values.front(), TrainAttackSteps(kind, o.steps),
                        o);
  }
  tc.Validate();
  const Dataset data = LoadDataset(o.data);

  UnfoldedModel init;
  if (!o.init.empty()) {
    init = LoadModel(o.init);
  } else {
    const LassoObjective obj{data.a, o.rho};
    obj.Validate();
    const SolverKind kind = KindFromFlag(o.kind);
    const int T = o.T > 0 ? o.T : DefaultT(kind);
    init = kind == SolverKind::kProxGd
               ? InitClassicalPgd(obj, DefaultPgdStep(obj), T)
               : InitClassicalAdmm(obj, o.lambda, 1.0, T);
  }
  ctx.resolved()["model"] = {{"kind", SolverKindName(init.kind)},
                             {"T", init.T()},
                             {"init", o.init.empty() ? "classical" : o.init}};
  ctx.resolved()["train"] = TrainJson(tc);
  ctx.PrintConfig();

  const TrainResult r = adversarial ? AdversarialTrain(init, data, tc)
                                    : SupervisedTrain(init, data, tc);
  ctx.Log(0, "initial train loss " + FormatDouble(r.initial_train_loss) +
                 ", val loss " + FormatDouble(r.initial_val_loss));
  if (!r.history.empty()) {
    ctx.Log(0, "final train loss " + FormatDouble(r.history.back().train_loss) +
                   ", val loss " + FormatDouble(r.history.back().val_loss) +
                   ", kept epoch " + std::to_string(r.best_epoch));
  }
  ctx.Emit(out, ModelToJson(r.model));
  if (!o.history.empty()) ctx.Emit(o.history, HistoryCsv(r));
  ctx.CommitFile(out);
}

std::vector<SolverSpec> SolverSpecs(const Options& o) {
  std::vector<SolverSpec> specs;
  for (const std::string& name : Split(o.solvers, ',')) {
    SolverSpec s;
    if (name == "ista") {
      s = SolverSpec::Ista(o.rho);
    } else if (name == "admm") {
      s = SolverSpec::Admm(o.rho, o.lambda);
    } else {
      throw UsageError("--solvers: unknown solver '" + name +
                       "' (expected ista or admm)");
    }
    s.tol = o.tol;
    s.max_iter = o.max_iter;
    specs.push_back(s);
  }
  return specs;
}

// Attack templates and the grid they sweep (radii, or trade-offs for CW).
std::pair<std::vector<AttackConfig>, std::vector<double>> CurveAttacks(
    const Options& o) {
  std::vector<AttackConfig> attacks;
  bool cw = false;
  for (const std::string& name : Split(o.attacks, ',')) {
    AttackKind kind;
    try {
      kind = ParseAttackKind(name);
    } catch (const std::exception&) {
      throw UsageError("--attacks: unknown attack '" + name + "'");
    }
    cw = cw || kind == AttackKind::kCw;
    attacks.push_back(MakeAttack(kind, 0.0, AttackSteps(kind, o.steps), o));
  }
  std::vector<double> grid;
  if (cw) {
    if (attacks.size() != 1) {
      throw UsageError("--attacks: cw cannot be combined with other attacks");
    }
    grid = o.c.empty() ? kDefaultTradeoffs : ParseGrid(o.c, "--c");
  } else {
    grid = ParseGrid(o.eps.empty() ? std::vector<std::string>{kDefaultEpsRange}
                                   : o.eps,
                     "--eps");
  }
  return {attacks, grid};
}

void LogCurveTrends(Context& ctx, const ExperimentConfig& cfg,
                    const CurveResult& r) {
  for (const AttackConfig& a : cfg.attacks) {
    for (const SolverSpec& s : cfg.solvers) {
      const std::string attack(AttackKindName(a.kind));
      const TrendReport t = CheckTrend(r.Curve(attack, s.name), 1, 3.0);
      ctx.Log(0, "trend " + attack + "/" + s.name + ": inversions " +
                     std::to_string(t.inversions) + ", growth " +
                     FormatDouble(t.growth) + (t.ok ? " (ok)" : " (FAILED)"));
    }
  }
  int failures = 0;
  for (const TrialResult& t : r.trials) failures += t.failed ? 1 : 0;
  if (failures > 0) {
    ctx.Log(0, std::to_string(failures) + " trials failed; see status column");
  }
}

ExperimentConfig CurveConfig(Context& ctx) {
  const Options& o = ctx.o();
  ExperimentConfig cfg;
  cfg.spec = SpecFromFlags(o);
  cfg.trials = o.trials;
  std::tie(cfg.attacks, cfg.grid) = CurveAttacks(o);
  cfg.solvers = SolverSpecs(o);
  cfg.seed = o.seed;
  cfg.redraw_matrix = !o.shared_matrix;
  cfg.jobs = ResolveJobs(o.jobs);
  cfg.Validate();
  Json attacks = Json::array();
  for (const AttackConfig& a : cfg.attacks) attacks.push_back(AttackJson(a));
  ctx.resolved()["attacks"] = attacks;
  ctx.resolved()["grid"] = cfg.grid;
  ctx.resolved()["grid_kind"] =
      cfg.grid_kind() == GridKind::kTradeoff ? "c" : "epsilon";
  ctx.resolved()["jobs"] = cfg.jobs;
  ctx.resolved()["trial_seeds"] = "DeriveSeed(seed, trial, grid_index)";
  return cfg;
}

void RunCurve(Context& ctx, const ExperimentConfig& cfg, const fs::path& dir) {
  const CurveResult r = DistortionCurve(cfg);
  LogCurveTrends(ctx, cfg, r);
  ctx.Emit(dir / "trials.csv", TrialsCsv(r));
  ctx.Emit(dir / "summary.csv", SummaryCsv(r));
}

void CmdEvalCurve(Context& ctx) {
  const fs::path dir = ctx.OutPath("eval-curve");
  const ExperimentConfig cfg = CurveConfig(ctx);
  ctx.PrintConfig();
  RunCurve(ctx, cfg, dir);
  ctx.CommitDir(dir);
}

void CmdBound(Context& ctx) {
  const Options& o = ctx.o();
  if (!o.model.empty()) {
    const fs::path out = ctx.OutPath("certificates.json");
    ctx.PrintConfig();
    const UnfoldedModel model = LoadModel(o.model);
    std::vector<LipschitzCertificate> certs;
    if (model.kind == SolverKind::kProxGd) {
      certs = {LipschitzPgd(model), LipschitzPgdRecursive(model)};
    } else {
      certs = {LipschitzAdmmClosed(model), LipschitzAdmmRecursive(model),
               SafeAdmmCertificate(model)};
    }
    for (const LipschitzCertificate& c : certs) {
      ctx.Log(0, std::string(CertificateMethodName(c.method)) + " C = " +
                     FormatDouble(c.c));
    }
    ctx.Emit(out, CertificatesToJson(model, certs));
    ctx.CommitFile(out);
    return;
  }
  if (o.standard.empty() || o.robust.empty()) {
    throw UsageError("bound: give --model, or --standard with --robust");
  }
  if (!o.train_eps.empty() && o.train_eps.size() != o.robust.size()) {
    throw UsageError("bound: --train-eps must be given once per --robust");
  }
  const fs::path out = ctx.OutPath("bound.csv");
  ctx.PrintConfig();
  const UnfoldedModel standard = LoadModel(o.standard);
  std::vector<BoundRow> rows;
  for (size_t i = 0; i < o.robust.size(); ++i) {
    const double eps = o.train_eps.empty() ? 0.0 : o.train_eps[i];
    rows.push_back(
        BoundComparison(standard, LoadModel(o.robust[i]), o.seed, eps));
    ctx.Log(0, o.robust[i] + ": ratio " + FormatDouble(rows.back().ratio));
  }
  ctx.Emit(out, BoundCsv(rows));
  ctx.CommitFile(out);
}

void CmdSurface(Context& ctx) {
  const Options& o = ctx.o();
  const fs::path dir = ctx.OutPath("surface");
  const Dataset data = LoadDataset(o.data);
  if (o.index < 0 || o.index >= data.count()) {
    throw UsageError("--index: out of range for a dataset of " +
                     std::to_string(data.count()) + " pairs");
  }
  const Solver solver = SolverFromFlags(ctx, data);
  const std::vector<double> eps =
      o.eps.empty() ? std::vector<double>{} : ParseGrid(o.eps, "--eps");
  if (eps.size() > 1) throw UsageError("--eps: surface takes one value");
  const bool attacked = !eps.empty() && eps.front() > 0.0;
  ctx.PrintConfig();

  const DenseVector x = data.x.col(o.index);
  const DenseVector s = data.s.col(o.index);
  const DenseVector center = Infer(solver, x).col(0);
  SurfaceOptions opts;
  opts.half_width = o.half_width;
  opts.resolution = o.resolution;
  opts.seed = o.seed;
  opts.mode = o.mode == "pca" ? DirectionMode::kTrajectoryPca
                              : DirectionMode::kRandom;
  if (opts.mode == DirectionMode::kTrajectoryPca) {
    opts.trajectory = SolverTrajectory(solver, x);
  }
  if (attacked) {
    const AttackConfig a = MakeAttack(AttackKind::kBim, eps.front(),
                                      AttackSteps(AttackKind::kBim, o.steps), o);
    opts.delta = RunAttack(solver, x, s, a).col(0);
  }
  const SurfaceGrid grid =
      ComputeSurfaceGrid(LassoObjective{data.a, o.rho}, x, center, opts);
  if (grid.fallback) {
    ctx.Log(0, "trajectory has rank < 2; second direction drawn at random");
  }
  ctx.Emit(dir / "grid.csv", SurfaceGridCsv(grid));
  if (opts.mode == DirectionMode::kTrajectoryPca) {
    ctx.Emit(dir / "trajectory.csv", TrajectoryCsv(grid));
  }
  ctx.CommitDir(dir);
}

// ---- reproduce -------------------------------------------------------------

std::vector<double> GridOr(const Options& o, std::vector<double> fallback) {
  return o.eps.empty() ? fallback : ParseGrid(o.eps, "--eps");
}

double SingleEps(const Options& o) {
  const std::vector<double> g = GridOr(o, {0.025});
  if (g.size() != 1) throw UsageError("--eps: this target takes one value");
  return g.front();
}

// One instance attacked with BIM against convergent ISTA.
struct Instance {
  Dataset data;
  LassoObjective obj;
  Solver solver;
  DenseVector x, s, delta, s_star, s_adv;
};

Instance AttackedInstance(Context& ctx) {
  const Options& o = ctx.o();
  const double eps = SingleEps(o);
  Instance in{GenCsDataset(SpecFromFlags(o), 1, o.seed), {}, {}, {}, {}, {},
              {}, {}};
  in.obj = LassoObjective{in.data.a, o.rho};
  SolverSpec spec = SolverSpec::Ista(o.rho);
  spec.tol = o.tol;
  spec.max_iter = o.max_iter;
  in.solver = spec.Build(in.data.a);
  in.x = in.data.x.col(0);
  in.s = in.data.s.col(0);
  const AttackConfig a = MakeAttack(AttackKind::kBim, eps,
                                    AttackSteps(AttackKind::kBim, o.steps), o);
  ctx.resolved()["attack"] = AttackJson(a);
  ctx.PrintConfig();
  in.delta = RunAttack(in.solver, in.x, in.s, a).col(0);
  in.s_star = Infer(in.solver, in.x).col(0);
  in.s_adv = Infer(in.solver, in.x + in.delta).col(0);
  ctx.Log(0, "distortion " + FormatDouble((in.s_star - in.s_adv).norm()) +
                 ", clean error " + FormatDouble((in.s_star - in.s).norm()));
  return in;
}

void ReproduceSurface(Context& ctx, const fs::path& dir) {
  const Options& o = ctx.o();
  const Instance in = AttackedInstance(ctx);
  SurfaceOptions opts;
  opts.resolution = o.resolution;
  opts.seed = o.seed;
  opts.mode = DirectionMode::kRandom;
  // Cover the zero start and the attacked solution.
  opts.half_width =
      o.half_width > 0.0
          ? o.half_width
          : 1.2 * std::max(in.s_star.norm(), (in.s_adv - in.s_star).norm());
  const SurfaceGrid clean = ComputeSurfaceGrid(in.obj, in.x, in.s_star, opts);
  opts.delta = in.delta;
  const SurfaceGrid attacked =
      ComputeSurfaceGrid(in.obj, in.x, in.s_star, opts);
  const auto pts =
      ProjectOntoGrid(clean, {in.s_star, in.s_adv, in.s, DenseVector::Zero(in.s.size())});
  CsvTable t({"point", "a", "b"});
  const char* names[] = {"s_star", "s_star_adv", "s_true", "s_init"};
  for (size_t i = 0; i < pts.size(); ++i) {
    t.Row().Add(names[i]).Add(pts[i].first).Add(pts[i].second);
  }
  ctx.Emit(dir / "surface_clean.csv", SurfaceGridCsv(clean));
  ctx.Emit(dir / "surface_attacked.csv", SurfaceGridCsv(attacked));
  ctx.Emit(dir / "points.csv", t.str());
}

void ReproduceObservation(Context& ctx, const fs::path& dir) {
  const Instance in = AttackedInstance(ctx);
  CsvTable t({"index", "x", "x_adv", "delta"});
  for (Eigen::Index i = 0; i < in.x.size(); ++i) {
    t.Row()
        .Add(static_cast<long long>(i))
        .Add(in.x(i))
        .Add(in.x(i) + in.delta(i))
        .Add(in.delta(i));
  }
  ctx.Emit(dir / "observation.csv", t.str());
}

void ReproduceConvergence(Context& ctx, const fs::path& dir) {
  const Instance in = AttackedInstance(ctx);
  CsvTable t({"run", "iteration", "objective", "error", "distance_to_clean"});
  const DenseVector inputs[2] = {in.x, in.x + in.delta};
  const char* runs[2] = {"clean", "attacked"};
  for (int r = 0; r < 2; ++r) {
    const ConvergenceResult c = RunToConvergence(
        in.solver.model, inputs[r], in.solver.tol, in.solver.max_iter, true);
    ctx.Log(0, std::string(runs[r]) + ": " + std::to_string(c.iterations) +
                   " iterations" + (c.converged ? "" : " (not converged)"));
    const int last = static_cast<int>(c.iterates.size()) - 1;
    for (int it = 0; it <= last; ++it) {
      if (it >= 100 && it % 100 != 0 && it != last) continue;
      const DenseVector& st = c.iterates[it];
      t.Row()
          .Add(runs[r])
          .Add(it)
          .Add(ObjectiveValue(in.obj, inputs[r], st))
          .Add((st - in.s).norm())
          .Add((st - in.s_star).norm());
    }
  }
  ctx.Emit(dir / "convergence.csv", t.str());
}

void ReproduceCurve(Context& ctx, const fs::path& dir) {
  const ExperimentConfig cfg = CurveConfig(ctx);
  ctx.PrintConfig();
  RunCurve(ctx, cfg, dir);
}

DefenseConfig DefenseFromFlags(Context& ctx, SolverKind kind,
                               AttackKind attack, std::vector<double> grid) {
  const Options& o = ctx.o();
  DefenseConfig cfg;
  cfg.spec = SpecFromFlags(o);
  cfg.kind = kind;
  cfg.T = o.T > 0 ? o.T : DefaultT(kind);
  cfg.rho = o.rho;
  cfg.lambda = o.lambda;
  cfg.train_count = o.train_count;
  cfg.test_count = o.test_count;
  cfg.grid = std::move(grid);
  cfg.attack = MakeAttack(attack, 0.0, TrainAttackSteps(attack, o.train_steps),
                          o);
  cfg.train = TrainFromFlags(o);
  cfg.seed = o.seed;
  cfg.jobs = ResolveJobs(o.jobs);
  cfg.Validate();
  ctx.resolved()["kind"] = SolverKindName(kind);
  ctx.resolved()["T"] = cfg.T;
  ctx.resolved()["grid"] = cfg.grid;
  ctx.resolved()["attack"] = AttackJson(cfg.attack);
  ctx.resolved()["train"] = TrainJson(cfg.train);
  ctx.resolved()["jobs"] = cfg.jobs;
  return cfg;
}

void EmitDefenseModels(Context& ctx, const fs::path& dir,
                       const DefenseModels& m, SolverKind kind,
                       const std::vector<double>& grid) {
  const std::string std_name = UnfoldedName(kind);
  const std::string rob_name = RobustName(kind);
  ctx.Emit(dir / ("history_" + std_name + ".csv"), HistoryCsv(m.standard));
  ctx.Emit(dir / "models" / (std_name + ".json"), ModelToJson(m.standard.model));
  for (size_t g = 0; g < m.robust.size(); ++g) {
    const std::string tag = rob_name + "_" + GridLabel(grid[g]);
    ctx.Emit(dir / ("history_" + tag + ".csv"), HistoryCsv(m.robust[g]));
    ctx.Emit(dir / "models" / (tag + ".json"), ModelToJson(m.robust[g].model));
  }
}

void LogDefenseTrends(Context& ctx, const ComparisonResult& c,
                      SolverKind kind, size_t grid_size) {
  const std::string cl = ClassicalName(kind);
  const std::string st = UnfoldedName(kind);
  const std::string rb = RobustName(kind);
  double max_clean_cost = 0.0, max_gain = 0.0;
  int wins = 0;
  for (size_t g = 0; g < grid_size; ++g) {
    const double gain = c.Attacked(st, g) - c.Attacked(rb, g);
    wins += gain > 0.0 ? 1 : 0;
    max_gain = std::max(max_gain, gain);
    max_clean_cost = std::max(max_clean_cost, c.Clean(rb, g) - c.Clean(cl, g));
  }
  ctx.Log(0, rb + " below " + st + " under attack at " + std::to_string(wins) +
                 " of " + std::to_string(grid_size) + " grid points");
  ctx.Log(0, "max clean cost " + FormatDouble(max_clean_cost) +
                 ", max attacked gain " + FormatDouble(max_gain));
}

void ReproduceDefense(Context& ctx, const fs::path& dir, SolverKind kind,
                      AttackKind attack) {
  const Options& o = ctx.o();
  const DefenseConfig cfg =
      DefenseFromFlags(ctx, kind, attack, GridOr(o, kDefenseEps));
  ctx.PrintConfig();
  const DefenseResult r = RunDefense(cfg);
  LogDefenseTrends(ctx, r.comparison, kind, cfg.grid.size());
  ctx.Emit(dir / "attacked.csv", ComparisonCsv(r.comparison, true));
  ctx.Emit(dir / "clean.csv", ComparisonCsv(r.comparison, false));
  EmitDefenseModels(ctx, dir, r, kind, cfg.grid);
}

// One robust model trained with CW at --train-c, swept over the c grid.
void ReproduceCw(Context& ctx, const fs::path& dir) {
  const Options& o = ctx.o();
  DefenseConfig cfg = DefenseFromFlags(ctx, SolverKind::kProxGd,
                                       AttackKind::kCw, {o.train_c});
  cfg.attack.c = o.train_c;
  const std::vector<double> grid =
      o.c.empty() ? kDefaultTradeoffs : ParseGrid(o.c, "--c");
  const AttackConfig eval = MakeAttack(
      AttackKind::kCw, 0.0, AttackSteps(AttackKind::kCw, o.steps), o);
  ctx.resolved()["eval_attack"] = AttackJson(eval);
  ctx.resolved()["eval_grid"] = grid;
  ctx.PrintConfig();

  const DefenseModels m = TrainDefenseModels(cfg);
  SolverSpec spec = SolverSpec::Ista(cfg.rho);
  spec.tol = o.tol;
  spec.max_iter = o.max_iter;
  const std::vector<ModelFamily> families = {
      {ClassicalName(cfg.kind), {spec.Build(m.train.a)}},
      {UnfoldedName(cfg.kind), {Solver::Fixed(m.standard.model)}},
      {RobustName(cfg.kind), {Solver::Fixed(m.robust.front().model)}}};
  const ComparisonResult c =
      RobustnessComparison(families, m.test, eval, grid, cfg.jobs);
  LogDefenseTrends(ctx, c, cfg.kind, grid.size());
  ctx.Emit(dir / "attacked.csv", ComparisonCsv(c, true));
  ctx.Emit(dir / "clean.csv", ComparisonCsv(c, false));
  EmitDefenseModels(ctx, dir, m, cfg.kind, cfg.grid);
}

// LISTA and robust LISTA trajectories over a PCA projection of the objective.
void ReproduceTrajectory(Context& ctx, const fs::path& dir) {
  const Options& o = ctx.o();
  const double eps = SingleEps(o);
  const DefenseConfig cfg =
      DefenseFromFlags(ctx, SolverKind::kProxGd, AttackKind::kBim, {eps});
  ctx.PrintConfig();
  const DefenseModels m = TrainDefenseModels(cfg);
  const DenseVector x = m.test.x.col(0);
  const std::vector<DenseVector> plain =
      ToVectors(UnfoldForward(m.standard.model, x).iterates);
  const std::vector<DenseVector> robust =
      ToVectors(UnfoldForward(m.robust.front().model, x).iterates);
  const DenseVector& center = plain.back();

  SurfaceOptions opts;
  opts.mode = DirectionMode::kTrajectoryPca;
  opts.trajectory = plain;
  opts.resolution = o.resolution;
  opts.seed = o.seed;
  double reach = 0.0;
  for (const auto* traj : {&plain, &robust}) {
    for (const DenseVector& p : *traj) reach = std::max(reach, (p - center).norm());
  }
  opts.half_width = o.half_width > 0.0 ? o.half_width : 1.2 * reach;
  const SurfaceGrid grid =
      ComputeSurfaceGrid(LassoObjective{m.test.a, cfg.rho}, x, center, opts);
  if (grid.fallback) {
    ctx.Log(0, "trajectory has rank < 2; second direction drawn at random");
  }
  ctx.Emit(dir / "surface.csv", SurfaceGridCsv(grid));
  ctx.Emit(dir / ("trajectory_" + UnfoldedName(cfg.kind) + ".csv"),
           TrajectoryCsv(grid));
  ctx.Emit(dir / ("trajectory_" + RobustName(cfg.kind) + ".csv"),
           TrajectoryCsv(ProjectOntoGrid(grid, robust)));
  EmitDefenseModels(ctx, dir, m, cfg.kind, cfg.grid);
}

void ReproduceBound(Context& ctx, const fs::path& dir) {
  const Options& o = ctx.o();
  if (o.seeds < 1) throw UsageError("--seeds must be >= 1");
  const DefenseConfig cfg = DefenseFromFlags(ctx, SolverKind::kProxGd,
                                             AttackKind::kBim,
                                             GridOr(o, kBoundEps));
  std::vector<uint64_t> seeds;
  for (int i = 0; i < o.seeds; ++i) seeds.push_back(o.seed + i);
  ctx.resolved()["seeds"] = seeds;
  ctx.PrintConfig();
  std::vector<DefenseModels> models;
  const std::vector<BoundRow> rows = BoundStudy(cfg, seeds, &models);
  for (size_t i = 0; i < seeds.size(); ++i) {
    const fs::path sub = dir / "models" / ("seed" + std::to_string(seeds[i]));
    ctx.Emit(sub / (UnfoldedName(cfg.kind) + ".json"),
             ModelToJson(models[i].standard.model));
    for (size_t g = 0; g < cfg.grid.size(); ++g) {
      ctx.Emit(sub / (RobustName(cfg.kind) + "_" + GridLabel(cfg.grid[g]) +
                      ".json"),
               ModelToJson(models[i].robust[g].model));
    }
  }
  int below = 0;
  for (const BoundRow& r : rows) below += r.ratio < 1.0 ? 1 : 0;
  ctx.Log(0, "ratio < 1 in " + std::to_string(below) + " of " +
                 std::to_string(rows.size()) + " (seed, eps) cells");
  ctx.Emit(dir / "bound.csv", BoundCsv(rows));
}

const std::vector<std::pair<std::string, std::function<void(Context&, const fs::path&)>>>&
Targets() {
  using Fn = std::function<void(Context&, const fs::path&)>;
  auto defense = [](SolverKind kind, AttackKind attack) -> Fn {
    return [kind, attack](Context& ctx, const fs::path& dir) {
      ReproduceDefense(ctx, dir, kind, attack);
    };
  };
  static const std::vector<std::pair<std::string, Fn>> targets = {
      {"fig1", ReproduceSurface},
      {"fig2", ReproduceObservation},
      {"fig3", ReproduceConvergence},
      {"fig4", ReproduceCurve},
      {"fig9", ReproduceTrajectory},
      {"fig10", defense(SolverKind::kProxGd, AttackKind::kBim)},
      {"fig11", defense(SolverKind::kProxGd, AttackKind::kBim)},
      {"fig12", ReproduceCw},
      {"fig13", defense(SolverKind::kProxGd, AttackKind::kNifgsm)},
      {"fig14", defense(SolverKind::kAdmm, AttackKind::kBim)},
      {"fig15", defense(SolverKind::kAdmm, AttackKind::kNifgsm)},
      {"fig16", ReproduceBound},
  };
  return targets;
}

void CmdReproduce(Context& ctx) {
  const Options& o = ctx.o();
  const fs::path dir = ctx.OutPath(o.target);
  for (const auto& [name, fn] : Targets()) {
    if (name == o.target) {
      fn(ctx, dir);
      ctx.CommitDir(dir);
      return;
    }
  }
  throw UsageError("reproduce: unknown target '" + o.target + "'");
}

// ---- Flag registration -----------------------------------------------------

void AddCommon(CLI::App* sub, Options& o, bool jobs) {
  sub->add_flag("-v,--verbose", o.verbose,
                "More log output on stderr (repeatable)");
  if (jobs) {
    sub->add_option("--jobs", o.jobs,
                    "Worker threads; 0 uses all available cores")
        ->check(CLI::NonNegativeNumber);
  }
}

void AddDims(CLI::App* sub, Options& o) {
  sub->add_option("--n", o.n, "Measurement dimension")
      ->check(CLI::PositiveNumber);
  sub->add_option("--m", o.m, "Signal dimension")->check(CLI::PositiveNumber);
  sub->add_option("--k", o.k, "Nonzeros per signal")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--matrix-std", o.matrix_std, "Std of the entries of A")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--signal-std", o.signal_std, "Std of the nonzeros of s")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--noise-std", o.noise_std, "Std of the noise w")
      ->check(CLI::NonNegativeNumber);
}

void AddRho(CLI::App* sub, Options& o) {
  sub->add_option("--rho", o.rho, "l1 weight of the LASSO objective")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--lambda", o.lambda, "ADMM penalty")
      ->check(CLI::PositiveNumber);
}

void AddConvergence(CLI::App* sub, Options& o) {
  sub->add_option("--tol", o.tol,
                  "Stop when the iterate moves less than this (l2)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", o.max_iter,
                  "Iteration cap for convergent solvers")
      ->check(CLI::PositiveNumber);
}

void AddSolver(CLI::App* sub, Options& o) {
  auto* solver =
      sub->add_option("--solver", o.solver,
                      "Classical solver run to convergence: ista or admm")
          ->check(CLI::IsMember({"ista", "admm"}));
  sub->add_option("--model", o.model,
                  "Unfolded model JSON; replaces --solver")
      ->check(CLI::ExistingFile)
      ->excludes(solver);
  AddRho(sub, o);
  AddConvergence(sub, o);
}

void AddAttackParams(CLI::App* sub, Options& o, const std::string& steps_doc) {
  sub->add_option("--steps", o.steps, steps_doc)
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--alpha", o.alpha,
                  "Step size of sign attacks; 0 uses 2*eps/steps")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--decay", o.decay, "NIFGSM momentum decay");
  sub->add_option("--cw-lr", o.cw_lr, "CW gradient step size")
      ->check(CLI::PositiveNumber);
}

void AddAttack(CLI::App* sub, Options& o, const std::string& steps_doc) {
  sub->add_option("--attack", o.attack, "fgsm, bim, nifgsm or cw")
      ->check(CLI::IsMember({"fgsm", "bim", "nifgsm", "cw"},
                            CLI::ignore_case));
  sub->add_option("--eps", o.eps,
                  "l-inf radius; value, comma list or lo:hi:step");
  sub->add_option("--c", o.c, "CW trade-off for --attack cw (default 0.01)");
  AddAttackParams(sub, o, steps_doc);
}

void AddTrain(CLI::App* sub, Options& o) {
  sub->add_option("--epochs", o.epochs, "Training epochs")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--batch-size", o.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber);
  sub->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--optimizer", o.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  sub->add_option("--val-fraction", o.val_fraction,
                  "Share of pairs held out for validation")
      ->check(CLI::Range(0.0, 0.9));
  sub->add_flag("--no-keep-best", o.no_keep_best,
                "Return the last parameters, not the best validated ones");
}

void AddKind(CLI::App* sub, Options& o) {
  sub->add_option("--kind", o.kind, "Unfolded optimizer: pgd or admm")
      ->check(CLI::IsMember({"pgd", "admm"}));
  sub->add_option("--T", o.T, "Unfolded iterations; 0 uses 5 (pgd) or 6 (admm)")
      ->check(CLI::NonNegativeNumber);
}

std::string OutDoc(const std::string& what) {
  return what + "; defaults under $" + kOutDirEnv;
}

void Build(CLI::App& app, Options& o) {
  app.description("Adversarial sensitivity and robust unfolding of iterative "
                  "LASSO solvers");
  app.name("advopt");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kVersion);

  CLI::App* gen = app.add_subcommand("gen-data", "Draw a synthetic "
                                     "compressed-sensing dataset");
  AddDims(gen, o);
  gen->add_option("--count", o.count, "Number of (x, s) pairs")
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", o.seed, "Random seed")->required();
  gen->add_option("--out", o.out, OutDoc("Dataset JSON"));
  AddCommon(gen, o, false);

  CLI::App* solve = app.add_subcommand("solve", "Recover s for every pair");
  solve->add_option("--data", o.data, "Dataset JSON")
      ->required()
      ->check(CLI::ExistingFile);
  AddSolver(solve, o);
  solve->add_option("--out", o.out, OutDoc("Result CSV"));
  AddCommon(solve, o, true);

  CLI::App* attack = app.add_subcommand("attack", "Attack a solver on every "
                                        "pair of a dataset");
  attack->add_option("--data", o.data, "Dataset JSON")
      ->required()
      ->check(CLI::ExistingFile);
  AddSolver(attack, o);
  AddAttack(attack, o, "Attack iterations; 0 uses 10 (100 for cw)");
  attack->add_option("--out", o.out, OutDoc("Result CSV"));
  AddCommon(attack, o, true);

  for (const bool adv : {false, true}) {
    CLI::App* train = app.add_subcommand(
        adv ? "adv-train" : "train",
        adv ? "Adversarially train an unfolded model"
            : "Train an unfolded model on clean pairs");
    train->add_option("--data", o.data, "Training dataset JSON")
        ->required()
        ->check(CLI::ExistingFile);
    AddKind(train, o);
    train->add_option("--init", o.init,
                      "Start from this model instead of the classical one")
        ->check(CLI::ExistingFile);
    AddRho(train, o);
    AddTrain(train, o);
    train->add_option("--seed", o.seed, "Shuffling and split seed")
        ->required();
    if (adv) {
      AddAttack(train, o,
                "Inner attack iterations; 0 uses 10 (20 for cw)");
    }
    train->add_option("--history", o.history,
                      "Also write per-epoch losses to this CSV");
    train->add_option("--out", o.out, OutDoc("Model JSON"));
    AddCommon(train, o, false);
  }

  CLI::App* curve = app.add_subcommand(
      "eval-curve", "Monte Carlo distortion versus attack strength");
  AddDims(curve, o);
  curve->add_option("--trials", o.trials, "Trials per grid value")
      ->check(CLI::PositiveNumber);
  curve->add_option("--attacks", o.attacks,
                    "Comma list of fgsm, bim, nifgsm; or cw alone");
  curve->add_option("--solvers", o.solvers, "Comma list of ista, admm");
  curve->add_option("--eps", o.eps,
                    std::string("Radius grid; values, comma lists or "
                                "lo:hi:step (default ") +
                        kDefaultEpsRange + ")");
  curve->add_option("--c", o.c,
                    "CW trade-off grid (default 1e-5,1e-4,...,1)");
  AddAttackParams(curve, o, "Attack iterations; 0 uses 10 (100 for cw)");
  AddRho(curve, o);
  AddConvergence(curve, o);
  curve->add_option("--seed", o.seed, "Master seed")->required();
  curve->add_flag("--shared-matrix", o.shared_matrix,
                  "Draw A once for all trials instead of once per trial");
  curve->add_option("--out", o.out,
                    OutDoc("Output directory (trials.csv, summary.csv)"));
  AddCommon(curve, o, true);

  CLI::App* bound = app.add_subcommand(
      "bound", "Lipschitz certificates of unfolded models");
  auto* model = bound->add_option("--model", o.model,
                                  "Certify this model (JSON output)")
                    ->check(CLI::ExistingFile);
  bound->add_option("--standard", o.standard,
                    "Reference model for ratio mode (CSV output)")
      ->check(CLI::ExistingFile)
      ->excludes(model);
  bound->add_option("--robust", o.robust,
                    "Robust model compared with --standard (repeatable)")
      ->check(CLI::ExistingFile)
      ->excludes(model);
  bound->add_option("--train-eps", o.train_eps,
                    "Training radius of each --robust, for the CSV");
  bound->add_option("--seed", o.seed, "Seed label written to the CSV");
  bound->add_option("--out", o.out,
                    OutDoc("Certificate JSON or ratio CSV"));
  AddCommon(bound, o, false);

  CLI::App* surface = app.add_subcommand(
      "surface", "Objective on a 2D slice through the solution");
  surface->add_option("--data", o.data, "Dataset JSON")
      ->required()
      ->check(CLI::ExistingFile);
  surface->add_option("--index", o.index, "Pair to use")
      ->check(CLI::NonNegativeNumber);
  AddSolver(surface, o);
  surface->add_option("--mode", o.mode,
                      "Directions: random, or pca of the solver trajectory")
      ->check(CLI::IsMember({"random", "pca"}));
  surface->add_option("--half-width", o.half_width, "Grid half width")
      ->check(CLI::PositiveNumber);
  surface->add_option("--resolution", o.resolution, "Points per axis")
      ->check(CLI::Range(2, 4001));
  surface->add_option("--eps", o.eps,
                      "BIM radius; > 0 draws the attacked objective");
  AddAttackParams(surface, o, "BIM iterations; 0 uses 10");
  surface->add_option("--seed", o.seed, "Seed of the random directions")
      ->required();
  surface->add_option("--out", o.out,
                      OutDoc("Output directory (grid.csv, trajectory.csv)"));
  AddCommon(surface, o, false);

  CLI::App* rep = app.add_subcommand(
      "reproduce", "Regenerate one figure's data at desk scale");
  std::vector<std::string> names;
  for (const auto& t : Targets()) names.push_back(t.first);
  rep->add_option("target", o.target, "Figure to regenerate")
      ->required()
      ->check(CLI::IsMember(names));
  rep->add_option("--seed", o.rep_seed, "Master seed (fig16 uses seed .. seed+S-1)");
  AddDims(rep, o);
  rep->add_option("--trials", o.trials, "Trials per radius (fig4)")
      ->check(CLI::PositiveNumber);
  rep->add_option("--eps", o.eps,
                  "Radius or radius grid; default depends on the target");
  rep->add_option("--c", o.c,
                  "CW trade-off grid for fig12 (default 1e-5,...,1)");
  rep->add_option("--train-c", o.train_c, "CW trade-off used in training (fig12)")
      ->check(CLI::NonNegativeNumber);
  rep->add_option("--train-count", o.train_count, "Training pairs")
      ->check(CLI::PositiveNumber);
  rep->add_option("--test-count", o.test_count, "Held-out pairs")
      ->check(CLI::PositiveNumber);
  rep->add_option("--seeds", o.seeds, "Training seeds (fig16)")
      ->check(CLI::PositiveNumber);
  rep->add_option("--T", o.T, "Unfolded iterations; 0 uses 5 (pgd) or 6 (admm)")
      ->check(CLI::NonNegativeNumber);
  AddTrain(rep, o);
  rep->add_option("--train-steps", o.train_steps,
                  "Inner attack iterations in training; 0 uses 10 (20 for cw)")
      ->check(CLI::NonNegativeNumber);
  AddAttackParams(rep, o,
                  "Evaluation attack iterations; 0 uses 10 (100 for cw)");
  AddRho(rep, o);
  AddConvergence(rep, o);
  rep->add_option("--solvers", o.solvers, "Solvers for fig4");
  rep->add_option("--attacks", o.attacks, "Attacks for fig4");
  rep->add_flag("--shared-matrix", o.shared_matrix,
                "fig4: draw A once for all trials");
  rep->add_option("--half-width", o.rep_half_width,
                  "Surface half width (fig1, fig9); 0 covers the trajectory")
      ->check(CLI::NonNegativeNumber);
  rep->add_option("--resolution", o.rep_resolution,
                  "Surface points per axis (fig1, fig9)")
      ->check(CLI::Range(2, 4001));
  rep->add_option("--out", o.out, OutDoc("Output directory"));
  AddCommon(rep, o, true);
}

}  // namespace

std::map<std::string, std::vector<std::string>> FlagTable() {
  Options o;
  CLI::App app;
  Build(app, o);
  std::map<std::string, std::vector<std::string>> table;
  for (const CLI::App* sub : app.get_subcommands({})) {
    auto& flags = table[sub->get_name()];
    for (const CLI::Option* opt : sub->get_options()) {
      for (const std::string& name : opt->get_lnames()) {
        if (name != "help") flags.push_back(name);
      }
    }
  }
  return table;
}

std::vector<std::string> ReproduceTargets() {
  std::vector<std::string> names;
  for (const auto& t : Targets()) names.push_back(t.first);
  return names;
}

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  Options o;
  CLI::App app;
  try {
    Build(app, o);
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "advopt: error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->get_name() == "reproduce") {
    o.seed = o.rep_seed;
    o.half_width = o.rep_half_width;
    o.resolution = o.rep_resolution;
  }
  try {
    Context ctx(o, *sub, err);
    const std::string name = sub->get_name();
    if (name == "gen-data") {
      CmdGenData(ctx);
    } else if (name == "solve") {
      CmdSolve(ctx);
    } else if (name == "attack") {
      CmdAttack(ctx);
    } else if (name == "train") {
      CmdTrain(ctx, false);
    } else if (name == "adv-train") {
      CmdTrain(ctx, true);
    } else if (name == "eval-curve") {
      CmdEvalCurve(ctx);
    } else if (name == "bound") {
      CmdBound(ctx);
    } else if (name == "surface") {
      CmdSurface(ctx);
    } else {
      CmdReproduce(ctx);
    }
  } catch (const UsageError& e) {
    err << "advopt: error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "advopt: error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

void TuneAllocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

}  // namespace advopt::cli
