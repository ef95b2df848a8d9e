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

#include <cstdint>
#include <string>
#include <string_view>

namespace neglm {

enum class OptimizerKind { kSgdDecay, kAdaptiveMoments };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

/// Everything that determines a training run besides the data.
struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kSgdDecay;
  double lr = 1.0;
  /// SGD: lr is divided by this after every epoch >= decay_start_epoch.
  double decay_factor = 1.2;
  int decay_start_epoch = 6;
  int epochs = 39;
  double clip_norm = 5.0;
  int batch_size = 20;
  int unroll = 20;
  int k = 100;
  double alpha = 0.75;
  // Constant NCE normalizer; unused by the other modes.
  double log_z = 0.0;
  std::uint64_t seed = 1;
  /// Reject a negative that equals the positive word and redraw.
  bool reject_positive_negatives = false;
  /// Draw one negative set per window and share it across positions.
  bool share_negatives = false;
  /// Drop the trailing partial unroll window during training.
  bool drop_partial_window = false;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

}  // namespace neglm
