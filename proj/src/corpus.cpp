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

#include "neglm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace neglm::corpus {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

// Calls on_token(word) for every token and on_eos() once per line.
template <class OnToken, class OnEos>
void scan(std::string_view text, OnToken on_token, OnEos on_eos) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(line[i])) ++i;
      std::size_t j = i;
      while (j < line.size() && !is_space(line[j])) ++j;
      if (j > i) on_token(line.substr(i, j - i));
      i = j;
    }
    on_eos();
    pos = end + 1;
  }
}

}  // namespace

Vocabulary::Vocabulary()
    : Vocabulary({std::string(kEos), std::string(kUnk)}, {0, 0}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
    : tokens_(std::move(tokens)), counts_(std::move(counts)) {
  if (tokens_.size() != counts_.size())
    throw std::invalid_argument("vocabulary: token and count lists differ in length");
  if (tokens_.size() < 2 || tokens_[0] != kEos || tokens_[1] != kUnk)
    throw std::invalid_argument("vocabulary: ids 0 and 1 must be <eos> and <unk>");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw std::invalid_argument("vocabulary: empty token");
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw std::invalid_argument("vocabulary: duplicate token " + tokens_[i]);
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk() : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    out << tokens_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("vocabulary: expected token<TAB>count, got '" + line + "'");
    tokens.push_back(line.substr(0, tab));
    counts.push_back(std::stoull(line.substr(tab + 1)));
  }
  return Vocabulary(std::move(tokens), std::move(counts));
}

Vocabulary build_vocab(std::string_view text, const VocabOptions& options) {
  std::map<std::string, std::uint64_t, std::less<>> raw;
  std::uint64_t eos_count = 0, unk_count = 0, total = 0;
  scan(
      text,
      [&](std::string_view w) {
        ++total;
        if (w == Vocabulary::kEos) {
          ++eos_count;
        } else if (w == Vocabulary::kUnk) {
          ++unk_count;
        } else {
          auto it = raw.find(w);
          if (it == raw.end()) it = raw.emplace(std::string(w), 0).first;
          ++it->second;
        }
      },
      [&] { ++eos_count; });
  if (total == 0) throw std::invalid_argument("build_vocab: no tokens in input");

  std::vector<std::pair<std::string, std::uint64_t>> words(raw.begin(), raw.end());
  // std::map iteration is already lexicographic, so a stable sort by count
  // leaves ties in lexicographic order.
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens{std::string(Vocabulary::kEos), std::string(Vocabulary::kUnk)};
  std::vector<std::uint64_t> counts{eos_count, 0};
  for (std::size_t i = 0; i < words.size(); ++i) {
    const bool in_top = !options.max_size || i < *options.max_size;
    const bool frequent = !options.min_count || words[i].second >= *options.min_count;
    if (in_top && frequent) {
      tokens.push_back(words[i].first);
      counts.push_back(words[i].second);
    } else {
      unk_count += words[i].second;
    }
  }
  counts[1] = unk_count;
  return Vocabulary(std::move(tokens), std::move(counts));
}

std::vector<TokenId> encode_stream(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  scan(
      text, [&](std::string_view w) { ids.push_back(vocab.id(w)); },
      [&] { ids.push_back(vocab.eos()); });
  return ids;
}

std::string decode_stream(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  bool line_start = true;
  for (TokenId id : ids) {
    if (id == vocab.eos()) {
      out += '\n';
      line_start = true;
      continue;
    }
    if (!line_start) out += ' ';
    out += vocab.token(id);
    line_start = false;
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

IdMatrix BatchPlan::inputs(std::size_t window) const {
  const Window& w = windows_.at(window);
  return streams_.block(0, w.start, streams_.rows(), w.length);
}

IdMatrix BatchPlan::targets(std::size_t window) const {
  const Window& w = windows_.at(window);
  return streams_.block(0, w.start + 1, streams_.rows(), w.length);
}

std::size_t BatchPlan::target_count() const {
  std::size_t n = 0;
  for (const Window& w : windows_) n += static_cast<std::size_t>(w.length);
  return n * static_cast<std::size_t>(streams_.rows());
}

BatchPlan make_batches(std::span<const TokenId> ids, int batch_size, int unroll,
                       bool drop_partial) {
  if (batch_size < 1 || unroll < 1)
    throw std::invalid_argument("make_batches: batch size and unroll must be >= 1");
  const auto b = static_cast<std::size_t>(batch_size);
  if (ids.size() < b * static_cast<std::size_t>(unroll + 1))
    throw std::invalid_argument("make_batches: need at least batch_size * (unroll + 1) tokens, got " +
                                std::to_string(ids.size()));
  const std::size_t length = ids.size() / b;

  BatchPlan plan;
  plan.unroll_ = unroll;
  plan.dropped_tail_ = ids.size() - length * b;
  plan.streams_.resize(batch_size, static_cast<Eigen::Index>(length));
  for (std::size_t lane = 0; lane < b; ++lane)
    for (std::size_t t = 0; t < length; ++t)
      plan.streams_(static_cast<Eigen::Index>(lane), static_cast<Eigen::Index>(t)) =
          ids[lane * length + t];

  const auto predictable = static_cast<Eigen::Index>(length - 1);
  for (Eigen::Index start = 0; start < predictable; start += unroll) {
    const Eigen::Index len = std::min<Eigen::Index>(unroll, predictable - start);
    if (len < unroll && drop_partial) break;
    plan.windows_.push_back({start, len});
  }
  return plan;
}

}  // namespace neglm::corpus
