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

#include "advopt/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "advopt/rng.h"
#include "advopt/tape.h"

namespace advopt {

namespace {

constexpr Eigen::Index kEvalChunk = 256;

enum class Slot { kM, kB, kTau, kMu };

struct ParamRef {
  int layer;
  Slot slot;
};

std::vector<ParamRef> TrainableSet(const UnfoldedModel& model,
                                   const TrainConfig& cfg) {
  std::vector<ParamRef> refs;
  for (int t = 0; t < model.T(); ++t) {
    if (cfg.train_matrices) {
      refs.push_back({t, Slot::kM});
      refs.push_back({t, Slot::kB});
    }
    if (cfg.train_prox_tau) refs.push_back({t, Slot::kTau});
    if (model.kind == SolverKind::kAdmm && cfg.train_mu) {
      refs.push_back({t, Slot::kMu});
    }
  }
  return refs;
}

NodeId NodeFor(const TapedModel& tm, const ParamRef& r) {
  const LayerNodes& n = tm.layers[r.layer];
  switch (r.slot) {
    case Slot::kM: return n.m;
    case Slot::kB: return n.b;
    case Slot::kTau: return n.tau;
    case Slot::kMu: return n.mu;
  }
  return n.m;
}

void ApplyStep(UnfoldedModel& model, const ParamRef& r,
               const DenseMatrix& step) {
  LayerParams& p = model.layers[r.layer];
  switch (r.slot) {
    case Slot::kM: p.m -= step; break;
    case Slot::kB: p.b -= step; break;
    case Slot::kTau: p.prox_tau = std::max(0.0, p.prox_tau - step(0, 0)); break;
    case Slot::kMu: p.mu -= step(0, 0); break;
  }
}

class Updater {
 public:
  Updater(const TrainConfig& cfg, size_t count) : cfg_(cfg) {
    first_.resize(count);
    second_.resize(count);
  }

  DenseMatrix Step(size_t i, const DenseMatrix& g) {
    if (cfg_.optimizer == UpdateRule::kPlainGradient) return cfg_.lr * g;
    if (first_[i].size() == 0) {
      first_[i] = DenseMatrix::Zero(g.rows(), g.cols());
      second_[i] = DenseMatrix::Zero(g.rows(), g.cols());
    }
    first_[i] = cfg_.beta1 * first_[i] + (1.0 - cfg_.beta1) * g;
    second_[i] =
        cfg_.beta2 * second_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, step_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, step_);
    return (cfg_.lr / c1) *
           (first_[i].array() /
            ((second_[i].array() / c2).sqrt() + cfg_.adam_eps))
               .matrix();
  }

  void NextStep() { ++step_; }

 private:
  const TrainConfig& cfg_;
  std::vector<DenseMatrix> first_, second_;
  int step_ = 1;
};

DenseMatrix Gather(const DenseMatrix& src,
                   std::span<const Eigen::Index> idx) {
  DenseMatrix out(src.rows(), static_cast<Eigen::Index>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) out.col(j) = src.col(idx[j]);
  return out;
}

DenseMatrix MaybeAttack(const UnfoldedModel& model, const DenseMatrix& x,
                        const DenseMatrix& s,
                        const std::optional<AttackConfig>& attack) {
  if (!attack) return x;
  const DenseMatrix delta = RunAttack(Solver::Fixed(model), x, s, *attack);
  return x + delta;
}

double SubsetMeanLoss(const UnfoldedModel& model, const DenseMatrix& x,
                      const DenseMatrix& s,
                      std::span<const Eigen::Index> idx,
                      const std::optional<AttackConfig>& attack) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (size_t start = 0; start < idx.size(); start += kEvalChunk) {
    const size_t len = std::min<size_t>(kEvalChunk, idx.size() - start);
    const auto chunk = idx.subspan(start, len);
    const DenseMatrix xc = Gather(x, chunk);
    const DenseMatrix sc = Gather(s, chunk);
    const DenseMatrix xin = MaybeAttack(model, xc, sc, attack);
    total += (UnfoldForward(model, xin).output - sc).squaredNorm();
  }
  return total / static_cast<double>(idx.size());
}

TrainResult Train(const UnfoldedModel& init, const Dataset& data,
                  const TrainConfig& cfg) {
  cfg.Validate();
  init.Validate();
  if (data.count() == 0) throw InvalidArgument("train: empty dataset");
  if (data.x.rows() != init.input_dim() || data.s.rows() != init.state_dim()) {
    throw ShapeError("train: dataset dims " + std::to_string(data.x.rows()) +
                     " -> " + std::to_string(data.s.rows()) +
                     " do not match the model");
  }

  const Eigen::Index count = data.count();
  std::vector<Eigen::Index> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(DeriveSeed(cfg.seed, 0));
  for (Eigen::Index i = count - 1; i > 0; --i) {
    std::swap(order[i], order[split_rng.UniformIndex(i + 1)]);
  }
  const auto val_count = static_cast<Eigen::Index>(
      std::floor(cfg.val_fraction * static_cast<double>(count)));
  std::vector<Eigen::Index> val(order.begin(), order.begin() + val_count);
  std::vector<Eigen::Index> train(order.begin() + val_count, order.end());
  if (static_cast<Eigen::Index>(train.size()) < cfg.batch_size) {
    throw InvalidArgument("train: batch_size " +
                          std::to_string(cfg.batch_size) +
                          " exceeds training split of " +
                          std::to_string(train.size()));
  }

  TrainResult result;
  UnfoldedModel model = init;
  result.initial_train_loss =
      SubsetMeanLoss(model, data.x, data.s, train, cfg.adv);
  result.initial_val_loss = SubsetMeanLoss(model, data.x, data.s, val, cfg.adv);
  result.model = model;
  const bool has_val = !val.empty();
  double best_val = result.initial_val_loss;

  const std::vector<ParamRef> refs = TrainableSet(model, cfg);
  Updater updater(cfg, refs.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(DeriveSeed(cfg.seed, 1, static_cast<uint64_t>(epoch)));
    for (size_t i = train.size() - 1; i > 0; --i) {
      std::swap(train[i], train[rng.UniformIndex(i + 1)]);
    }
    double epoch_total = 0.0;
    for (size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const size_t len =
          std::min<size_t>(cfg.batch_size, train.size() - start);
      const std::span<const Eigen::Index> batch(train.data() + start, len);
      const DenseMatrix xb = Gather(data.x, batch);
      const DenseMatrix sb = Gather(data.s, batch);
      const DenseMatrix xin = MaybeAttack(model, xb, sb, cfg.adv);

      Tape tape;
      const NodeId xn = tape.Constant(xin);
      const TapedModel tm =
          RecordUnfolded(tape, model, xn, ParamMode::kTrainable);
      const NodeId loss = tape.Scale(
          tape.SquaredNorm(tape.Sub(tm.output, tape.Constant(sb))),
          1.0 / static_cast<double>(len));
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw NonFiniteLossError("train: non-finite loss at epoch " +
                                 std::to_string(epoch) +
                                 "; lower the learning rate (lr=" +
                                 std::to_string(cfg.lr) + ")");
      }
      epoch_total += value * static_cast<double>(len);
      const GradResult grads = tape.Backward(loss);
      for (size_t i = 0; i < refs.size(); ++i) {
        ApplyStep(model, refs[i], updater.Step(i, grads.at(NodeFor(tm, refs[i]))));
      }
      updater.NextStep();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_total / static_cast<double>(train.size());
    rec.val_loss = SubsetMeanLoss(model, data.x, data.s, val, cfg.adv);
    result.history.push_back(rec);
    if (!cfg.keep_best || !has_val) {
      result.model = model;
      result.best_epoch = epoch;
    } else if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace

void TrainConfig::Validate() const {
  if (epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(lr > 0.0)) throw InvalidArgument("train: lr must be > 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw InvalidArgument("train: val_fraction must be in [0, 1)");
  }
  if (adv) adv->Validate();
}

TrainResult SupervisedTrain(const UnfoldedModel& model, const Dataset& data,
                            const TrainConfig& cfg) {
  TrainConfig plain = cfg;
  plain.adv.reset();
  return Train(model, data, plain);
}

TrainResult AdversarialTrain(const UnfoldedModel& model, const Dataset& data,
                             const TrainConfig& cfg) {
  if (!cfg.adv) {
    throw InvalidArgument("adversarial_train: no inner attack configured");
  }
  return Train(model, data, cfg);
}

double MeanLoss(const UnfoldedModel& model, const Dataset& data,
                const std::optional<AttackConfig>& attack) {
  std::vector<Eigen::Index> all(data.count());
  std::iota(all.begin(), all.end(), 0);
  return SubsetMeanLoss(model, data.x, data.s, all, attack);
}

EvalResult Evaluate(const Solver& solver, const Dataset& data,
                    const std::optional<AttackConfig>& attack) {
  if (data.count() == 0) throw InvalidArgument("evaluate: empty dataset");
  EvalResult out;
  out.records.reserve(data.count());
  for (Eigen::Index start = 0; start < data.count(); start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, data.count() - start);
    const DenseMatrix xc = data.x.middleCols(start, len);
    const DenseMatrix sc = data.s.middleCols(start, len);
    const DenseMatrix clean = Infer(solver, xc);
    DenseVector d;
    if (attack) {
      const DenseMatrix delta = RunAttack(solver, xc, sc, *attack);
      d = DistortionFromReference(solver, clean, xc, delta);
    } else {
      d = (clean - sc).colwise().norm().transpose();
    }
    for (Eigen::Index j = 0; j < len; ++j) out.records.push_back(d(j));
  }
  out.mean = std::accumulate(out.records.begin(), out.records.end(), 0.0) /
             static_cast<double>(out.records.size());
  return out;
}

}  // namespace advopt
