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

// Binary model file. All integers and floats are little-endian; floats are
// IEEE-754 binary64 written row-major.
//
//   "NEGF"              magic
//   u32                 format version
//   u32                 mode tag (0 nce, 1 neg, 2 neglm, 3 neglm-b,
//                       16 joint embedding)
//   u64 |V|, u64 d
//   encoder spec        u32 kind, u64 input_dim, u64 hidden_dim,
//                       u32 layers, u32 window_size, f64 dropout,
//                       u8 linear_window
//   f64 alpha, u64 k, u64 seed, f64 log_z, u64 config_hash
//   metadata            u32 n, then n (str key, str value)
//   vocabulary block    u32 sections, each: str name, u64 n,
//                       n (str token, u64 count)
//   parameter blocks    u32 sets, each: str name, u32 blocks, each:
//                       str name, u64 rows, u64 cols, rows*cols f64
//   u32                 CRC-32 of every preceding byte
//
// where str is a u32 byte length followed by the bytes.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "neglm/distlab.hpp"
#include "neglm/lm.hpp"

namespace neglm::cli {

inline constexpr char kMagic[4] = {'N', 'E', 'G', 'F'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kJointEmbeddingTag = 16;

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize_model(const lm::LanguageModel& model);
/// Throws ModelFormatError on bad magic, unsupported version, truncation or
/// checksum mismatch.
lm::LanguageModel deserialize_model(std::string_view bytes);

void save_model(const std::string& path, const lm::LanguageModel& model);
lm::LanguageModel load_model(const std::string& path);

/// Factor tables of a joint-distribution embedding with their labels.
struct JointEmbedding {
  distlab::FactorPair factors;
  std::vector<std::string> x_labels;
  std::vector<std::string> y_labels;
  int k = 1;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> metadata;
};

std::string serialize_joint(const JointEmbedding& embedding);
JointEmbedding deserialize_joint(std::string_view bytes);
void save_joint(const std::string& path, const JointEmbedding& embedding);
JointEmbedding load_joint(const std::string& path);

/// Reads the mode tag of a serialized model without a full parse.
std::uint32_t peek_mode_tag(std::string_view bytes);

}  // namespace neglm::cli
