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

#include "neglm/params.hpp"

#include <cstring>
#include <stdexcept>

namespace neglm {

std::size_t ParamSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  names_.push_back(std::move(name));
  blocks_.push_back(Eigen::MatrixXd::Zero(rows, cols));
  return blocks_.size() - 1;
}

std::size_t ParamSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw std::out_of_range("no parameter block named " + std::string(name));
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    out.add(names_[i], blocks_[i].rows(), blocks_[i].cols());
  return out;
}

void ParamSet::set_zero() {
  for (auto& b : blocks_) b.setZero();
}

double ParamSet::squared_norm() const {
  double total = 0.0;
  for (const auto& b : blocks_) total += b.squaredNorm();
  return total;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.size());
  return n;
}

bool ParamSet::all_finite() const {
  for (const auto& b : blocks_)
    if (!b.allFinite()) return false;
  return true;
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].rows() != other.blocks_[i].rows() ||
        blocks_[i].cols() != other.blocks_[i].cols())
      return false;
    const auto bytes = static_cast<std::size_t>(blocks_[i].size()) * sizeof(double);
    if (bytes > 0 && std::memcmp(blocks_[i].data(), other.blocks_[i].data(), bytes) != 0)
      return false;
  }
  return true;
}

}  // namespace neglm
