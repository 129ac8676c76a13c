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

#ifndef ADVOPT_TRAINING_H_
#define ADVOPT_TRAINING_H_

// Deep unfolding: supervised training of the per-layer parameters of an
// UnfoldedModel, and min-max adversarial training where each mini-batch is
// attacked against the current parameters before the gradient step.

#include <cstdint>
#include <optional>
#include <vector>

#include "advopt/attacks.h"
#include "advopt/dataset.h"
#include "advopt/optimizers.h"

namespace advopt {

enum class UpdateRule { kPlainGradient, kAdaptiveMoments };

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double lr = 1e-3;
  UpdateRule optimizer = UpdateRule::kAdaptiveMoments;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  std::optional<AttackConfig> adv;  // set for adversarial training
  double val_fraction = 0.1;
  // Trainable set. ADMM step sizes are trained only when train_mu is set.
  bool train_matrices = true;
  bool train_prox_tau = true;
  bool train_mu = true;
  // Return the parameters with the lowest validation loss seen (the
  // untrained model included) instead of the last ones.
  bool keep_best = true;

  void Validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation split
};

struct TrainResult {
  UnfoldedModel model;
  std::vector<EpochRecord> history;
  double initial_train_loss = 0.0;
  double initial_val_loss = 0.0;
  int best_epoch = 0;  // 0 means the initial parameters were kept
};

TrainResult SupervisedTrain(const UnfoldedModel& model, const Dataset& data,
                            const TrainConfig& cfg);

// Requires cfg.adv. Each step attacks the batch with cfg.adv against the
// current parameters, then descends on mean ||f(x + delta) - s||^2.
TrainResult AdversarialTrain(const UnfoldedModel& model, const Dataset& data,
                             const TrainConfig& cfg);

// Mean per-sample loss ||f(x) - s||^2 of a fixed-T model over the dataset,
// attacked with `attack` when given.
double MeanLoss(const UnfoldedModel& model, const Dataset& data,
                const std::optional<AttackConfig>& attack = std::nullopt);

struct EvalResult {
  double mean = 0.0;
  std::vector<double> records;  // one distortion per pair
};

// Without an attack: ||f(x) - s||_2 against the ground truth.
// With an attack: ||f(x) - f(x + delta)||_2.
EvalResult Evaluate(const Solver& solver, const Dataset& data,
                    const std::optional<AttackConfig>& attack = std::nullopt);

}  // namespace advopt

#endif  // ADVOPT_TRAINING_H_
