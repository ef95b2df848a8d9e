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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace neglm::corpus {

using TokenId = std::int32_t;

/// Dense token ids with training-split counts. <eos> is always id 0 and
/// <unk> id 1; the remaining words follow by descending count, ties broken
/// lexicographically.
class Vocabulary {
 public:
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kUnk = "<unk>";

  Vocabulary();

  /// Rebuilds a vocabulary from an id-ordered token list. Throws
  /// std::invalid_argument if the specials are missing or misplaced, or a
  /// token repeats.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

  std::size_t size() const { return tokens_.size(); }
  TokenId eos() const { return 0; }
  TokenId unk() const { return 1; }

  /// Id of `token`, or unk() if absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::uint64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::span<const std::string> tokens() const { return tokens_; }

  /// `token<TAB>count` per line, ordered by id.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

struct VocabOptions {
  std::optional<std::size_t> max_size;
  std::optional<std::uint64_t> min_count;
};

/// Whitespace tokenization with one <eos> per line. Words outside the top
/// max_size (specials excluded) or below min_count are counted as <unk>.
/// Throws std::invalid_argument on empty input.
Vocabulary build_vocab(std::string_view text, const VocabOptions& options = {});

std::vector<TokenId> encode_stream(std::string_view text, const Vocabulary& vocab);

/// Inverse of encode_stream up to <unk> collapse: tokens joined by spaces,
/// each <eos> ends a line.
std::string decode_stream(std::span<const TokenId> ids, const Vocabulary& vocab);

std::string read_text_file(const std::string& path);

using IdMatrix = Eigen::Matrix<TokenId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A token sequence laid out as batch_size contiguous streams, cut into
/// unroll-length windows of (input, target) pairs offset by one.
class BatchPlan {
 public:
  struct Window {
    Eigen::Index start;
    Eigen::Index length;
  };

  int batch_size() const { return static_cast<int>(streams_.rows()); }
  int unroll() const { return unroll_; }
  Eigen::Index stream_length() const { return streams_.cols(); }
  const IdMatrix& streams() const { return streams_; }
  std::size_t dropped_tail() const { return dropped_tail_; }
  std::span<const Window> windows() const { return windows_; }

  /// batch_size x length blocks.
  IdMatrix inputs(std::size_t window) const;
  IdMatrix targets(std::size_t window) const;

  std::size_t target_count() const;

 private:
  friend BatchPlan make_batches(std::span<const TokenId>, int, int, bool);

  IdMatrix streams_;
  int unroll_ = 1;
  std::size_t dropped_tail_ = 0;
  std::vector<Window> windows_;
};

/// Throws std::invalid_argument when ids.size() < batch_size * (unroll + 1).
/// A trailing window shorter than unroll is kept unless drop_partial.
BatchPlan make_batches(std::span<const TokenId> ids, int batch_size, int unroll,
                       bool drop_partial = false);

}  // namespace neglm::corpus
