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

#include "tagbench/optim.hpp"

#include <cmath>

namespace tagbench {

std::string phase_name(Phase p) { return p == Phase::adam ? "adam" : "sgd"; }

Optimizer::Optimizer(std::vector<ad::Tensor> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg), lr_(cfg.adam_lr) {
  m_.resize(params_.size());
  v_.resize(params_.size());
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Optimizer::step() {
  ++step_count_;
  for (size_t i = 0; i < params_.size(); ++i) {
    ad::Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const float* g = p.grad_values().data();
    float* w = p.data();
    const int64_t n = p.size();
    if (m_[i].size() != static_cast<size_t>(n)) m_[i].assign(static_cast<size_t>(n), 0.0f);

    if (phase_ == Phase::adam) {
      if (v_[i].size() != static_cast<size_t>(n)) v_[i].assign(static_cast<size_t>(n), 0.0f);
      const float b1 = static_cast<float>(cfg_.adam_beta1);
      const float b2 = static_cast<float>(cfg_.adam_beta2);
      const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(step_count_));
      const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(step_count_));
      const float lr = static_cast<float>(lr_);
      const float eps = static_cast<float>(cfg_.adam_eps);
      float* m = m_[i].data();
      float* v = v_[i].data();
      for (int64_t j = 0; j < n; ++j) {
        m[j] = b1 * m[j] + (1.0f - b1) * g[j];
        v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
        const float mhat = m[j] / static_cast<float>(bc1);
        const float vhat = v[j] / static_cast<float>(bc2);
        w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    } else {
      const float mu = static_cast<float>(cfg_.sgd_momentum);
      const float lr = static_cast<float>(lr_);
      float* buf = m_[i].data();
      for (int64_t j = 0; j < n; ++j) {
        buf[j] = mu * buf[j] + g[j];
        const float d = cfg_.nesterov ? g[j] + mu * buf[j] : buf[j];
        w[j] -= lr * d;
      }
    }
  }
}

ScheduleEvent Optimizer::schedule_update(double val_loss) {
  ScheduleEvent ev;
  if (val_loss < best_val_) {
    best_val_ = val_loss;
    plateau_ = 0;
    ev.improved = true;
    return ev;
  }
  ++plateau_;
  if (plateau_ < cfg_.patience) return ev;
  plateau_ = 0;
  if (phase_ == Phase::adam) {
    phase_ = Phase::sgd;
    lr_ = cfg_.sgd_lr;
    step_count_ = 0;
    for (auto& m : m_) std::fill(m.begin(), m.end(), 0.0f);  // fresh momentum
    ev.switched_to_sgd = true;
  } else if (decays_ < cfg_.max_decays) {
    lr_ *= cfg_.lr_decay;
    ++decays_;
    ev.decayed = true;
  } else {
    finished_ = true;
    ev.finished = true;
  }
  return ev;
}

}  // namespace tagbench
