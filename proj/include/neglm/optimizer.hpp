// Copyright 2026 The neglm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "neglm/params.hpp"
#include "neglm/train_config.hpp"

namespace neglm {

/// Scales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<ParamSet* const> grads, double max_norm);

class Optimizer {
 public:
  virtual ~Optimizer() = default;

  /// Applies one update of each params[i] along -grads[i] (descent) and
  /// bumps the version of every updated set.
  virtual void step(std::span<ParamSet* const> params,
                    std::span<const ParamSet* const> grads) = 0;

  /// Called after each epoch (1-based).
  virtual void end_epoch(int /*epoch*/) {}

  virtual double learning_rate() const = 0;
};

/// Plain SGD; after every epoch >= decay_start the rate is divided by
/// decay_factor.
class SgdDecay final : public Optimizer {
 public:
  SgdDecay(double lr, double decay_factor, int decay_start)
      : lr_(lr), decay_factor_(decay_factor), decay_start_(decay_start) {}

  void step(std::span<ParamSet* const> params, std::span<const ParamSet* const> grads) override;
  void end_epoch(int epoch) override;
  double learning_rate() const override { return lr_; }

 private:
  double lr_;
  double decay_factor_;
  int decay_start_;
};

/// Adaptive moment estimation with bias correction.
class Adam final : public Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit Adam(double lr) : lr_(lr) {}

  void step(std::span<ParamSet* const> params, std::span<const ParamSet* const> grads) override;
  double learning_rate() const override { return lr_; }

 private:
  double lr_;
  long steps_ = 0;
  std::vector<std::vector<Eigen::MatrixXd>> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config);

}  // namespace neglm
