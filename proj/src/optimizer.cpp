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

#include "neglm/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace neglm {

double clip_global_norm(std::span<ParamSet* const> grads, double max_norm) {
  double squared = 0.0;
  for (const ParamSet* g : grads) squared += g->squared_norm();
  const double norm = std::sqrt(squared);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (ParamSet* g : grads)
      for (std::size_t b = 0; b < g->size(); ++b) (*g)[b] *= scale;
  }
  return norm;
}

void SgdDecay::step(std::span<ParamSet* const> params, std::span<const ParamSet* const> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("params/grads mismatch");
  for (std::size_t s = 0; s < params.size(); ++s) {
    ParamSet& p = *params[s];
    for (std::size_t b = 0; b < p.size(); ++b) p[b].noalias() -= lr_ * (*grads[s])[b];
    p.touch();
  }
}

void SgdDecay::end_epoch(int epoch) {
  if (epoch >= decay_start_) lr_ /= decay_factor_;
}

void Adam::step(std::span<ParamSet* const> params, std::span<const ParamSet* const> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("params/grads mismatch");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t s = 0; s < params.size(); ++s)
      for (std::size_t b = 0; b < params[s]->size(); ++b) {
        m_[s].push_back(Eigen::MatrixXd::Zero((*params[s])[b].rows(), (*params[s])[b].cols()));
        v_[s].push_back(m_[s].back());
      }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps_hat = kEpsilon * std::sqrt(c2);
  for (std::size_t s = 0; s < params.size(); ++s) {
    ParamSet& p = *params[s];
    for (std::size_t b = 0; b < p.size(); ++b) {
      const auto& g = (*grads[s])[b];
      m_[s][b] = kBeta1 * m_[s][b] + (1.0 - kBeta1) * g;
      v_[s][b] = kBeta2 * v_[s][b] + (1.0 - kBeta2) * g.cwiseAbs2();
      p[b].array() -= step * m_[s][b].array() / (v_[s][b].array().sqrt() + eps_hat);
    }
    p.touch();
  }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config) {
  switch (config.optimizer) {
    case OptimizerKind::kSgdDecay:
      return std::make_unique<SgdDecay>(config.lr, config.decay_factor, config.decay_start_epoch);
    case OptimizerKind::kAdaptiveMoments:
      return std::make_unique<Adam>(config.lr);
  }
  throw std::invalid_argument("unknown optimizer");
}

}  // namespace neglm
