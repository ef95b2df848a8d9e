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

#include <sstream>

#include <gtest/gtest.h>

namespace neglm::corpus {
namespace {

TEST(Vocabulary, CountsWordsAndSentenceEnds) {
  const auto v = build_vocab("a b a\n");
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.token(v.eos()), "<eos>");
  EXPECT_EQ(v.token(v.unk()), "<unk>");
  EXPECT_EQ(v.count(v.id("a")), 2u);
  EXPECT_EQ(v.count(v.id("b")), 1u);
  EXPECT_EQ(v.count(v.eos()), 1u);
  EXPECT_EQ(v.count(v.unk()), 0u);
  EXPECT_EQ(v.id("a"), 2);
}

TEST(Vocabulary, MaxSizeKeepsMostFrequent) {
  const auto v = build_vocab("a a a a a b b b c\n", {.max_size = 2, .min_count = {}});
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("b"));
  EXPECT_FALSE(v.contains("c"));
  EXPECT_EQ(v.id("c"), v.unk());
  EXPECT_EQ(v.count(v.unk()), 1u);
  EXPECT_EQ(v.size(), 4u);
}

TEST(Vocabulary, TiesBreakLexicographically) {
  const auto v = build_vocab("z y x y z x q\n", {.max_size = 2, .min_count = {}});
  EXPECT_EQ(v.token(2), "x");
  EXPECT_EQ(v.token(3), "y");
  EXPECT_FALSE(v.contains("z"));
}

TEST(Vocabulary, MinCount) {
  const auto v = build_vocab("a a b\nc a\n", {.max_size = {}, .min_count = 2});
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.count(v.unk()), 2u);
  EXPECT_EQ(v.count(v.eos()), 2u);
}

TEST(Vocabulary, RejectsEmptyText) {
  EXPECT_THROW(build_vocab(""), std::invalid_argument);
}

TEST(Vocabulary, RoundTripsThroughText) {
  const auto v = build_vocab("the cat sat\non the mat\n");
  std::stringstream s;
  v.write(s);
  EXPECT_EQ(s.str().substr(0, 8), "<eos>\t2\n");
  EXPECT_EQ(Vocabulary::read(s), v);
}

TEST(Vocabulary, RejectsMisplacedSpecials) {
  EXPECT_THROW(Vocabulary({"a", "<unk>"}, {1, 0}), std::invalid_argument);
  EXPECT_THROW(Vocabulary({"<eos>", "<unk>", "a", "a"}, {1, 0, 1, 1}), std::invalid_argument);
}

TEST(EncodeStream, EmptyLineIsOneEos) {
  const auto v = build_vocab("a\n");
  const auto ids = encode_stream("\n", v);
  ASSERT_EQ(ids.size(), 1u);
  EXPECT_EQ(ids[0], v.eos());
}

TEST(EncodeStream, UnknownWordsCollapse) {
  const auto v = build_vocab("a b\n");
  const auto ids = encode_stream("a zzz b\n", v);
  EXPECT_EQ(ids, (std::vector<TokenId>{v.id("a"), v.unk(), v.id("b"), v.eos()}));
}

TEST(EncodeStream, DecodeRoundTrip) {
  const std::string text = "the cat sat\non the mat\n\nthe end\n";
  const auto v = build_vocab(text);
  EXPECT_EQ(decode_stream(encode_stream(text, v), v), text);
}

TEST(EncodeStream, FinalLineWithoutNewlineStillEnds) {
  const auto v = build_vocab("a b\nc");
  const auto ids = encode_stream("a b\nc", v);
  EXPECT_EQ(ids.size(), 5u);
  EXPECT_EQ(ids.back(), v.eos());
}

TEST(MakeBatches, SmallExample) {
  std::vector<TokenId> ids(10);
  for (int i = 0; i < 10; ++i) ids[i] = i;
  const auto plan = make_batches(ids, 2, 2);
  EXPECT_EQ(plan.stream_length(), 5);
  ASSERT_EQ(plan.windows().size(), 2u);
  EXPECT_EQ(plan.dropped_tail(), 0u);
  const IdMatrix in0 = plan.inputs(0), tg0 = plan.targets(0);
  EXPECT_EQ(in0(0, 0), 0);
  EXPECT_EQ(tg0(0, 0), 1);
  EXPECT_EQ(in0(1, 0), 5);
  EXPECT_EQ(tg0(1, 1), 7);
  EXPECT_EQ(plan.targets(1)(1, 1), 9);
  EXPECT_EQ(plan.target_count(), 8u);
}

TEST(MakeBatches, TailAndPartialWindows) {
  std::vector<TokenId> ids(23);
  for (int i = 0; i < 23; ++i) ids[i] = i;
  const auto plan = make_batches(ids, 2, 4);
  EXPECT_EQ(plan.stream_length(), 11);
  EXPECT_EQ(plan.dropped_tail(), 1u);
  ASSERT_EQ(plan.windows().size(), 3u);
  EXPECT_EQ(plan.windows()[2].length, 2);
  EXPECT_EQ(plan.target_count(), 20u);
  const auto dropped = make_batches(ids, 2, 4, true);
  EXPECT_EQ(dropped.windows().size(), 2u);
  EXPECT_EQ(dropped.target_count(), 16u);
}

TEST(MakeBatches, RejectsShortStreams) {
  std::vector<TokenId> ids(5, 0);
  EXPECT_THROW(make_batches(ids, 2, 2), std::invalid_argument);
  EXPECT_THROW(make_batches(ids, 0, 2), std::invalid_argument);
}

TEST(MakeBatches, CoverageAndReconstruction) {
  for (int n : {60, 61, 97, 200}) {
    for (int batch : {1, 3, 4}) {
      for (int unroll : {1, 5, 7}) {
        std::vector<TokenId> ids(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) ids[i] = i;
        const auto plan = make_batches(ids, batch, unroll);
        const Eigen::Index len = plan.stream_length();
        EXPECT_EQ(len, n / batch);
        EXPECT_EQ(plan.dropped_tail(), static_cast<std::size_t>(n % batch));
        EXPECT_EQ(plan.target_count(), static_cast<std::size_t>(batch * (len - 1)));
        // Every token but the stream-final ones is a target exactly once, and
        // inputs concatenated over windows give back each stream.
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        for (int lane = 0; lane < batch; ++lane) {
          std::vector<TokenId> rebuilt;
          for (std::size_t w = 0; w < plan.windows().size(); ++w) {
            const IdMatrix in = plan.inputs(w), tg = plan.targets(w);
            for (Eigen::Index t = 0; t < in.cols(); ++t) {
              EXPECT_EQ(tg(lane, t), in(lane, t) + 1);
              rebuilt.push_back(in(lane, t));
              ++seen[static_cast<std::size_t>(tg(lane, t))];
            }
          }
          rebuilt.push_back(plan.targets(plan.windows().size() - 1)(lane, plan.windows().back().length - 1));
          ASSERT_EQ(static_cast<Eigen::Index>(rebuilt.size()), len);
          for (Eigen::Index t = 0; t < len; ++t) EXPECT_EQ(rebuilt[t], lane * len + t);
        }
        for (int lane = 0; lane < batch; ++lane)
          for (Eigen::Index t = 0; t < len; ++t)
            EXPECT_EQ(seen[static_cast<std::size_t>(lane * len + t)], t == 0 ? 0 : 1);
      }
    }
  }
}

TEST(MakeBatches, Deterministic) {
  const std::string text = "a b c d\ne f g\nh i j k l\n";
  const auto v1 = build_vocab(text), v2 = build_vocab(text);
  EXPECT_EQ(v1, v2);
  const auto ids = encode_stream(text, v1);
  EXPECT_EQ(make_batches(ids, 2, 3).streams(), make_batches(encode_stream(text, v2), 2, 3).streams());
}

}  // namespace
}  // namespace neglm::corpus
