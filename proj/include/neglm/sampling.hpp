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
#include <span>
#include <vector>

#include "neglm/rng.hpp"

namespace neglm::sampling {

inline constexpr double kDefaultAlpha = 0.75;

/// Smoothed unigram p^alpha(w) = count(w)^alpha / sum_v count(v)^alpha,
/// with an alias table for O(1) draws. Words with zero count get zero
/// probability for every alpha, including alpha = 0.
class NoiseDistribution {
 public:
  NoiseDistribution() = default;

  std::size_t size() const { return probs_.size(); }
  double alpha() const { return alpha_; }
  std::span<const double> probs() const { return probs_; }
  double prob(std::size_t w) const { return probs_[w]; }

  /// Acceptance threshold of bucket i, in [0, 1].
  std::span<const double> thresholds() const { return thresholds_; }
  std::span<const std::uint32_t> aliases() const { return aliases_; }

  /// Mass routed to each outcome by the alias table; equals probs().
  std::vector<double> reconstruct() const;

  std::uint32_t sample(Rng& rng) const;

 private:
  friend NoiseDistribution build_noise(std::span<const double>, double);
  friend NoiseDistribution from_probabilities(std::vector<double>, double);

  double alpha_ = 1.0;
  std::vector<double> probs_;
  std::vector<double> thresholds_;
  std::vector<std::uint32_t> aliases_;
};

/// Throws std::invalid_argument for empty or all-zero counts, negative or
/// non-finite counts, or alpha outside [0, 1].
NoiseDistribution build_noise(std::span<const double> counts, double alpha);
NoiseDistribution build_noise(std::span<const std::uint64_t> counts,
                              double alpha);

/// Alias table over an explicit probability vector (normalized here).
NoiseDistribution from_probabilities(std::vector<double> probs,
                                     double alpha = 1.0);

inline std::uint32_t sample(const NoiseDistribution& noise, Rng& rng) {
  return noise.sample(rng);
}

}  // namespace neglm::sampling
