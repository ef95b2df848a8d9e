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
#include <vector>

#include <Eigen/Core>

namespace neglm {

/// Ordered, named dense parameter blocks.
///
/// `version` is bumped by every optimizer update; traces recorded against
/// an older version are rejected by backward passes.
class ParamSet {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return blocks_.size(); }
  Eigen::MatrixXd& operator[](std::size_t i) { return blocks_[i]; }
  const Eigen::MatrixXd& operator[](std::size_t i) const { return blocks_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  /// Throws std::out_of_range for unknown names.
  std::size_t index(std::string_view name) const;

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  void set_zero();
  double squared_norm() const;
  std::size_t scalar_count() const;
  bool all_finite() const;

  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  /// Bitwise comparison of names, shapes and values; version is ignored.
  bool operator==(const ParamSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> blocks_;
  std::uint64_t version_ = 0;
};

}  // namespace neglm
