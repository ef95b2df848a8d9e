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

#include "neglm/sampling.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace neglm::sampling {
namespace {

// Vose's alias method. Scaled masses n * p_i are split into buckets below
// and above 1; each small bucket is topped up from one large bucket.
void build_alias(std::span<const double> probs, std::vector<double>& thresholds,
                 std::vector<std::uint32_t>& aliases) {
  const std::size_t n = probs.size();
  thresholds.assign(n, 1.0);
  aliases.resize(n);
  std::iota(aliases.begin(), aliases.end(), 0u);

  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  small.reserve(n);
  large.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = probs[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    small.pop_back();
    const std::uint32_t l = large.back();
    thresholds[s] = scaled[s];
    aliases[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers differ from 1 only by rounding.
  for (std::uint32_t i : large) thresholds[i] = 1.0;
  for (std::uint32_t i : small) thresholds[i] = 1.0;
}

}  // namespace

NoiseDistribution from_probabilities(std::vector<double> probs, double alpha) {
  if (probs.empty()) throw std::invalid_argument("noise: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("noise: probabilities must be finite and >= 0");
    total += p;
  }
  if (!(total > 0.0)) throw std::invalid_argument("noise: zero total mass");
  for (double& p : probs) p /= total;

  NoiseDistribution noise;
  noise.alpha_ = alpha;
  noise.probs_ = std::move(probs);
  build_alias(noise.probs_, noise.thresholds_, noise.aliases_);
  return noise;
}

NoiseDistribution build_noise(std::span<const double> counts, double alpha) {
  if (counts.empty()) throw std::invalid_argument("noise: empty counts");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("noise: alpha must lie in [0, 1]");
  std::vector<double> weights(counts.size());
  bool any_positive = false;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double c = counts[i];
    if (!(c >= 0.0) || !std::isfinite(c))
      throw std::invalid_argument("noise: counts must be finite and >= 0");
    weights[i] = c > 0.0 ? std::pow(c, alpha) : 0.0;
    any_positive = any_positive || c > 0.0;
  }
  if (!any_positive) throw std::invalid_argument("noise: all counts are zero");
  return from_probabilities(std::move(weights), alpha);
}

NoiseDistribution build_noise(std::span<const std::uint64_t> counts,
                              double alpha) {
  std::vector<double> c(counts.begin(), counts.end());
  return build_noise(std::span<const double>(c), alpha);
}

std::vector<double> NoiseDistribution::reconstruct() const {
  const std::size_t n = probs_.size();
  std::vector<double> mass(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    mass[i] += thresholds_[i] * inv_n;
    mass[aliases_[i]] += (1.0 - thresholds_[i]) * inv_n;
  }
  return mass;
}

std::uint32_t NoiseDistribution::sample(Rng& rng) const {
  const auto bucket = static_cast<std::uint32_t>(rng.below(probs_.size()));
  return rng.uniform() < thresholds_[bucket] ? bucket : aliases_[bucket];
}

}  // namespace neglm::sampling
