/*
 * Copyright 2026 The tagbench authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "tagbench/tensor.hpp"

namespace tagbench {

enum class Phase { adam, sgd };

std::string phase_name(Phase p);

/// Two-phase schedule: ADAM until the validation loss plateaus, then SGD with
/// Nesterov momentum; each further plateau decays the learning rate by 10x,
/// at most twice, after which the next plateau ends training.
struct OptimizerConfig {
  double adam_lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sgd_lr = 1e-3;
  double sgd_momentum = 0.9;
  bool nesterov = true;
  int patience = 5;
  double lr_decay = 0.1;
  int max_decays = 2;
};

struct ScheduleEvent {
  bool improved = false;
  bool switched_to_sgd = false;
  bool decayed = false;
  bool finished = false;
};

class Optimizer {
 public:
  Optimizer(std::vector<ad::Tensor> params, OptimizerConfig cfg = {});

  void zero_grad();
  void step();

  /// Called once per epoch with the validation loss.
  ScheduleEvent schedule_update(double val_loss);

  Phase phase() const { return phase_; }
  double lr() const { return lr_; }
  int64_t step_count() const { return step_count_; }
  bool finished() const { return finished_; }
  double best_val() const { return best_val_; }

 private:
  std::vector<ad::Tensor> params_;
  OptimizerConfig cfg_;
  Phase phase_ = Phase::adam;
  double lr_;
  int64_t step_count_ = 0;   // ADAM bias-correction counter, reset on phase switch
  int plateau_ = 0;
  int decays_ = 0;
  bool finished_ = false;
  double best_val_ = std::numeric_limits<double>::infinity();
  // moment buffers, allocated on first step per parameter
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace tagbench
