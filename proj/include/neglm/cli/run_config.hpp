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
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace neglm::cli {

/// Flat, ordered `key=value` settings. Keys match the long command-line
/// flag names, so a written config can be replayed with --config.
class RunConfig {
 public:
  void set(std::string key, std::string value);
  template <class T>
  void set_number(std::string key, T value);
  std::optional<std::string> get(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
  /// Blank lines and lines starting with '#' are skipped. Throws
  /// std::runtime_error on a line without '='.
  static RunConfig read(std::istream& in);
  static RunConfig read_file(const std::string& path);

  /// FNV-1a over the key=value lines, skipping the output path so that
  /// reruns into another file hash the same.
  std::uint64_t hash() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest text that parses back to the same double.
std::string format_double(double v);

template <class T>
void RunConfig::set_number(std::string key, T value) {
  if constexpr (std::is_floating_point_v<T>)
    set(std::move(key), format_double(static_cast<double>(value)));
  else
    set(std::move(key), std::to_string(value));
}

}  // namespace neglm::cli
