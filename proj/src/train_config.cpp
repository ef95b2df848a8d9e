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

#include "neglm/train_config.hpp"

#include <stdexcept>

namespace neglm {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgdDecay:
      return "sgd";
    case OptimizerKind::kAdaptiveMoments:
      return "adam";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgdDecay;
  if (name == "adam") return OptimizerKind::kAdaptiveMoments;
  throw std::invalid_argument("unknown optimizer: " + std::string(name));
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + what);
  };
  require(lr > 0.0, "lr must be positive");
  require(decay_factor >= 1.0, "decay factor must be >= 1");
  require(decay_start_epoch >= 0, "decay start must be >= 0");
  require(epochs >= 1, "epochs must be >= 1");
  require(clip_norm > 0.0, "clip norm must be positive");
  require(batch_size >= 1, "batch size must be >= 1");
  require(unroll >= 1, "unroll must be >= 1");
  require(k >= 1, "k must be >= 1");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
}

}  // namespace neglm
