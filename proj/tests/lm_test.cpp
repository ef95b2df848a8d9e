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

#include "neglm/lm.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "bigram_chain.hpp"
#include "neglm/optimizer.hpp"
#include "oracles.hpp"

namespace neglm::lm {
namespace {

corpus::Vocabulary flat_vocab(int size) {
  std::vector<std::string> tokens{"<eos>", "<unk>"};
  for (int i = 2; i < size; ++i) tokens.push_back("w" + std::to_string(i));
  return corpus::Vocabulary(tokens, std::vector<std::uint64_t>(static_cast<std::size_t>(size), 1));
}

corpus::Vocabulary counted_vocab(const std::vector<std::uint64_t>& counts) {
  std::vector<std::string> tokens{"<eos>", "<unk>"};
  for (std::size_t i = 2; i < counts.size(); ++i) tokens.push_back("w" + std::to_string(i));
  return corpus::Vocabulary(tokens, counts);
}

encoder::EncoderSpec window(Eigen::Index d) {
  encoder::EncoderSpec s;
  s.input_dim = d;
  s.hidden_dim = d;
  return s;
}

LanguageModel random_model(Mode mode, int size, Eigen::Index d, Rng& rng) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(size));
  for (auto& c : counts) c = 1 + rng.below(50);
  LanguageModel m = make_model(counted_vocab(counts), mode, window(d), 1 + static_cast<int>(rng.below(10)),
                               rng.uniform(), rng.next_u64());
  for (Eigen::Index i = 0; i < m.word_table().size(); ++i) m.word_table()(i) = rng.normal();
  if (has_bias(mode))
    for (Eigen::Index i = 0; i < m.bias().size(); ++i) m.bias()(i) = rng.normal();
  return m;
}

Vector random_vector(Eigen::Index d, Rng& rng) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

TEST(Mode, ParseAndTraits) {
  EXPECT_EQ(parse_mode("neglm-b"), Mode::kNeglmB);
  EXPECT_EQ(to_string(Mode::kNce), "nce");
  EXPECT_THROW(parse_mode("softmax"), std::invalid_argument);
  EXPECT_TRUE(has_bias(Mode::kNce));
  EXPECT_FALSE(has_bias(Mode::kNeglm));
  EXPECT_TRUE(has_unigram_prior(Mode::kNeglmB));
  EXPECT_FALSE(has_unigram_prior(Mode::kNeg));
}

TEST(MakeModel, BiasInitialization) {
  const auto v = flat_vocab(10);
  const auto nce = make_model(v, Mode::kNce, window(4), 5, 0.75, 1);
  EXPECT_TRUE((nce.bias().array() == -std::log(10.0)).all());
  for (Mode m : {Mode::kNeg, Mode::kNeglm, Mode::kNeglmB})
    EXPECT_TRUE(make_model(v, m, window(4), 5, 0.75, 1).bias().isZero(0.0));
  EXPECT_LE(nce.word_table().cwiseAbs().maxCoeff(), 0.05);
  EXPECT_EQ(nce.metadata.at("rng"), std::string(Rng::kAlgorithm));
  EXPECT_NEAR(nce.noise.prob(3), 0.1, 1e-15);
}

TEST(ClassifierLogit, NceNoiseTermCancels) {
  auto m = make_model(flat_vocab(2), Mode::kNce, window(3), 2, 1.0, 1);
  m.word_table().setZero();
  m.bias().setZero();
  const double z = classifier_logit(m, 1, Vector::Ones(3));
  EXPECT_NEAR(z, 0.0, 1e-15);
  EXPECT_NEAR(testing::oracle_sigmoid(z), 0.5, 1e-15);
}

TEST(ClassifierLogit, NceInitialBiasGivesZero) {
  auto m = make_model(flat_vocab(10), Mode::kNce, window(3), 1, 1.0, 1);
  m.word_table().setZero();
  EXPECT_NEAR(classifier_logit(m, 4, Vector::Ones(3)), 0.0, 1e-15);
}

TEST(ClassifierLogit, NegIgnoresNoise) {
  for (Mode mode : {Mode::kNeg, Mode::kNeglm}) {
    auto m = make_model(counted_vocab({1, 1, 7, 2}), mode, window(2), 3, 0.75, 1);
    m.word_table().setZero();
    m.word_table()(2, 0) = 1.3;
    EXPECT_DOUBLE_EQ(classifier_logit(m, 2, Vector::Unit(2, 0)), 1.3);
  }
  auto b = make_model(counted_vocab({1, 1, 7, 2}), Mode::kNeglmB, window(2), 3, 0.75, 1);
  b.word_table().setZero();
  b.bias()(3, 0) = -0.4;
  EXPECT_DOUBLE_EQ(classifier_logit(b, 3, Vector::Unit(2, 0)), -0.4);
}

TEST(ClassifierLogit, RejectsUnknownIds) {
  const auto m = make_model(flat_vocab(4), Mode::kNeg, window(2), 1, 1.0, 1);
  EXPECT_THROW(classifier_logit(m, 4, Vector::Zero(2)), std::out_of_range);
  EXPECT_THROW(classifier_logit(m, -1, Vector::Zero(2)), std::out_of_range);
}

// NCE with uniform noise and a bias frozen at log(k p_n) is NEG.
TEST(ClassifierLogit, NceReducesToNegWithCompensatingBias) {
  Rng rng(3);
  const int size = 12, k = 4;
  auto nce = make_model(flat_vocab(size), Mode::kNce, window(5), k, 1.0, 1);
  auto neg = make_model(flat_vocab(size), Mode::kNeg, window(5), k, 1.0, 1);
  for (Eigen::Index i = 0; i < nce.word_table().size(); ++i) nce.word_table()(i) = rng.normal();
  neg.word_table() = nce.word_table();
  nce.bias().setConstant(std::log(k * (1.0 / size)));
  for (int trial = 0; trial < 20; ++trial) {
    const Vector c = random_vector(5, rng);
    for (TokenId w = 0; w < size; ++w)
      EXPECT_NEAR(classifier_logit(nce, w, c), classifier_logit(neg, w, c), 1e-13);
  }
}

TEST(BatchLoss, ZeroLogitsGiveKPlusOneLogTwo) {
  auto m = make_model(flat_vocab(6), Mode::kNeglm, window(3), 4, 0.75, 1);
  m.word_table().setZero();
  corpus::IdMatrix targets(2, 3);
  targets << 1, 2, 3, 4, 5, 0;
  Rng rng(1);
  const auto negs = draw_negatives(m.noise, targets, 4, rng);
  const std::vector<Matrix> ctx(3, Matrix::Ones(3, 2));
  EXPECT_NEAR(batch_loss(m, ctx, targets, negs).loss, 5.0 * std::log(2.0), 1e-14);
}

TEST(BatchLoss, HandComputedSinglePosition) {
  auto m = make_model(flat_vocab(4), Mode::kNeg, window(2), 1, 1.0, 1);
  m.word_table().setZero();
  m.word_table().row(2) << 1.0, 0.0;
  m.word_table().row(3) << 0.0, 2.0;
  corpus::IdMatrix targets(1, 1);
  targets << 2;
  NegativeSamples negs{1, 1, {3}};
  Matrix c(2, 1);
  c << 0.5, 0.25;
  const std::vector<Matrix> ctx{c};
  EXPECT_NEAR(batch_loss(m, ctx, targets, negs).loss, 1.4481539683602134, 1e-14);
}

TEST(BatchLoss, MatchesCentralDifferences) {
  for (Mode mode : {Mode::kNce, Mode::kNeg, Mode::kNeglm, Mode::kNeglmB}) {
    Rng rng(7);
    LanguageModel m = random_model(mode, 20, 8, rng);
    m.k = 3;
    corpus::IdMatrix targets(2, 3);
    for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i) = static_cast<TokenId>(rng.below(20));
    const auto negs = draw_negatives(m.noise, targets, m.k, rng);
    std::vector<Matrix> ctx;
    for (int t = 0; t < 3; ++t) ctx.push_back(Matrix::Random(8, 2));
    const auto res = batch_loss(m, ctx, targets, negs);
    auto f = [&] { return batch_loss(m, ctx, targets, negs).loss; };
    double worst = 0.0;
    for (std::size_t b : {std::size_t{1}, std::size_t{2}}) {
      if (b == 2 && !has_bias(mode)) {
        EXPECT_TRUE(res.d_embeddings[2].isZero(0.0));
        continue;
      }
      Matrix& block = m.embeddings[b];
      for (Eigen::Index i = 0; i < block.size(); ++i)
        worst = std::max(worst, encoder::relative_error(res.d_embeddings[b](i),
                                                        testing::central_difference(f, block(i), 1e-5)));
    }
    for (int t = 0; t < 3; ++t)
      for (Eigen::Index i = 0; i < ctx[t].size(); ++i)
        worst = std::max(worst, encoder::relative_error(res.d_contexts[t](i),
                                                        testing::central_difference(f, ctx[t](i), 1e-5)));
    EXPECT_LE(worst, 1e-4) << to_string(mode);
  }
}

TEST(WindowObjective, InputTableGradient) {
  Rng rng(9);
  encoder::EncoderSpec spec;
  spec.kind = encoder::EncoderKind::kLstm;
  spec.input_dim = 4;
  spec.hidden_dim = 5;
  LanguageModel m = make_model(flat_vocab(8), Mode::kNeglmB, spec, 2, 0.75, 3);
  for (Eigen::Index i = 0; i < m.input_table().size(); ++i) m.input_table()(i) = 0.5 * rng.normal();
  corpus::IdMatrix inputs(2, 3), targets(2, 3);
  for (Eigen::Index i = 0; i < inputs.size(); ++i) {
    inputs(i) = static_cast<TokenId>(rng.below(8));
    targets(i) = static_cast<TokenId>(rng.below(8));
  }
  const auto negs = draw_negatives(m.noise, targets, 2, rng);
  const auto start = encoder::initial_state(spec, 2);
  auto f = [&] {
    auto s = start;
    return window_objective(m, s, inputs, targets, negs, encoder::Phase::kEval, nullptr).loss;
  };
  auto s = start;
  const auto res = window_objective(m, s, inputs, targets, negs, encoder::Phase::kEval, nullptr);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.input_table().size(); ++i)
    worst = std::max(worst, encoder::relative_error(res.d_embeddings[0](i),
                                                    testing::central_difference(f, m.input_table()(i), 1e-5)));
  for (std::size_t b = 0; b < m.encoder.size(); ++b)
    for (Eigen::Index i = 0; i < m.encoder[b].size(); ++i)
      worst = std::max(worst, encoder::relative_error(res.d_encoder[b](i),
                                                      testing::central_difference(f, m.encoder[b](i), 1e-5)));
  EXPECT_LE(worst, 1e-4);
}

TEST(DrawNegatives, RejectAndShare) {
  const auto noise = sampling::from_probabilities({0.7, 0.1, 0.1, 0.1});
  corpus::IdMatrix targets = corpus::IdMatrix::Zero(3, 4);
  Rng rng(2);
  const auto rejected = draw_negatives(noise, targets, 5, rng, true, false);
  for (TokenId u : rejected.ids) EXPECT_NE(u, 0);
  const auto shared = draw_negatives(noise, targets, 5, rng, false, true);
  for (Eigen::Index t = 0; t < 4; ++t)
    for (Eigen::Index lane = 0; lane < 3; ++lane)
      for (int i = 0; i < 5; ++i) EXPECT_EQ(shared.at(t, lane, i), shared.at(0, 0, i));
  const auto only = sampling::from_probabilities({1.0, 0.0});
  const auto forced = draw_negatives(only, targets, 2, rng, true, false);
  for (TokenId u : forced.ids) EXPECT_EQ(u, 0);
}

TEST(ConditionalLogProbs, NormalizedForEveryMode) {
  Rng rng(11);
  for (Mode mode : {Mode::kNce, Mode::kNeg, Mode::kNeglm, Mode::kNeglmB}) {
    const auto m = random_model(mode, 30, 6, rng);
    for (int i = 0; i < 10; ++i) {
      const Vector lp = conditional_log_probs(m, 3.0 * random_vector(6, rng));
      EXPECT_NEAR(std::log(lp.array().exp().sum()), 0.0, 1e-10);
    }
  }
}

TEST(ConditionalLogProbs, EqualScoresAreUniform) {
  auto m = make_model(flat_vocab(7), Mode::kNeg, window(3), 1, 1.0, 1);
  m.word_table().setZero();
  const Vector lp = conditional_log_probs(m, Vector::Ones(3));
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_NEAR(lp(i), -std::log(7.0), 1e-15);
}

TEST(ConditionalLogProbs, HandBuiltThreeWordModel) {
  auto m = make_model(counted_vocab({2, 1, 1}), Mode::kNeglmB, window(2), 1, 1.0, 1);
  m.word_table() << 0.2, 0.0, -0.3, 0.0, 1.0, 0.0;
  m.bias() << 0.1, 0.0, -0.2;
  Vector expect(3);
  expect << 0.3 + std::log(0.5), -0.3 + std::log(0.25), 0.8 + std::log(0.25);
  EXPECT_LE((conditional_log_probs(m, Vector::Unit(2, 0)) - testing::oracle_log_softmax(expect))
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
}

TEST(ConditionalLogProbs, NeglmIsNegTimesUnigram) {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_model(Mode::kNeglm, 2 + static_cast<int>(rng.below(40)), 5, rng);
    const Vector c = random_vector(5, rng);
    const Vector neg = conditional_log_probs(m, c, Mode::kNeg).array().exp();
    Vector expect(neg.size());
    for (Eigen::Index w = 0; w < neg.size(); ++w) expect(w) = neg(w) * m.noise.prob(static_cast<std::size_t>(w));
    expect /= expect.sum();
    const Vector got = conditional_log_probs(m, c).array().exp();
    EXPECT_LE((got - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Evaluate, UniformModelPerplexityIsVocabularySize) {
  auto m = make_model(flat_vocab(10), Mode::kNeg, window(3), 1, 1.0, 1);
  m.word_table().setZero();
  const std::vector<TokenId> ids{0, 3, 4, 9, 2, 0, 1, 5};
  const auto e = evaluate(m, ids);
  EXPECT_NEAR(e.perplexity, 10.0, 1e-12);
  EXPECT_EQ(e.tokens, 7u);
  EXPECT_THROW(evaluate(m, std::vector<TokenId>{3}), std::invalid_argument);
}

TEST(RankAugment, Identity) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    RankAugmentInput in;
    const Eigen::Index v = 10, d = 4;
    in.word_table = Matrix::Random(v, d) * 2.0;
    in.bias = Vector::Random(v);
    in.contexts = Matrix::Random(5, d) * 2.0;
    in.k = 1 + static_cast<int>(rng.below(10));
    in.noise_probs = (Vector::Random(v).array() + 1.5).matrix();
    in.noise_probs /= in.noise_probs.sum();
    const auto r = rank_augment_check(in);
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.max_deviation, 1e-12);
    if (trial == 0) EXPECT_FALSE(rank_augment_check(in, Augmentation::kDropNormalizer).passed);
  }
}

TEST(Clipping, BoundsGlobalNorm) {
  ParamSet a, b;
  a.add("x", 3, 2);
  b.add("y", 4, 1);
  a[0].setConstant(3.0);
  b[0].setConstant(-4.0);
  std::vector<ParamSet*> grads{&a, &b};
  const double before = clip_global_norm(grads, 5.0);
  EXPECT_NEAR(before, std::sqrt(6 * 9.0 + 4 * 16.0), 1e-12);
  EXPECT_LE(std::sqrt(a.squared_norm() + b.squared_norm()), 5.0 + 1e-9);
  const ParamSet copy = a;
  clip_global_norm(grads, 100.0);
  EXPECT_EQ(a, copy);
}

TEST(Optimizer, SgdDecaySchedule) {
  SgdDecay sgd(1.0, 1.2, 6);
  for (int e = 1; e <= 5; ++e) sgd.end_epoch(e);
  EXPECT_EQ(sgd.learning_rate(), 1.0);
  sgd.end_epoch(6);
  EXPECT_NEAR(sgd.learning_rate(), 1.0 / 1.2, 1e-15);
  sgd.end_epoch(7);
  EXPECT_NEAR(sgd.learning_rate(), 1.0 / 1.44, 1e-15);
}

TEST(Optimizer, SgdAndAdamSteps) {
  ParamSet p, g;
  p.add("w", 2, 1);
  g.add("w", 2, 1);
  g[0] << 2.0, -0.5;
  std::vector<ParamSet*> ps{&p};
  std::vector<const ParamSet*> gs{&g};
  SgdDecay sgd(0.1, 2.0, 1);
  sgd.step(ps, gs);
  EXPECT_NEAR(p[0](0), -0.2, 1e-15);
  EXPECT_EQ(p.version(), 1u);
  p.set_zero();
  Adam adam(0.01);
  adam.step(ps, gs);
  EXPECT_NEAR(p[0](0), -0.01, 1e-9);
  EXPECT_NEAR(p[0](1), 0.01, 1e-9);
}

struct TinyCorpus {
  corpus::Vocabulary vocab;
  std::vector<TokenId> train, valid;
};

TinyCorpus tiny_corpus() {
  Rng rng(5);
  const auto chain = testing::make_chain(12, 2, rng);
  int state = 0;
  const std::string train = chain.generate(6000, state, rng);
  const std::string valid = chain.generate(800, state, rng);
  TinyCorpus c;
  c.vocab = corpus::build_vocab(train);
  c.train = corpus::encode_stream(train, c.vocab);
  c.valid = corpus::encode_stream(valid, c.vocab);
  return c;
}

TEST(Train, BitIdenticalPerSeed) {
  const auto c = tiny_corpus();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.k = 5;
  cfg.batch_size = 4;
  cfg.unroll = 10;
  encoder::EncoderSpec spec;
  spec.kind = encoder::EncoderKind::kLstm;
  spec.input_dim = 8;
  spec.hidden_dim = 8;
  spec.layers = 2;
  spec.dropout = 0.3;
  std::vector<std::string> ra, rb;
  const auto a = train(c.vocab, c.train, c.valid, cfg, Mode::kNeglmB, spec,
                       [&](const EpochMetrics& m) { ra.push_back(m.to_record(false)); });
  const auto b = train(c.vocab, c.train, c.valid, cfg, Mode::kNeglmB, spec,
                       [&](const EpochMetrics& m) { rb.push_back(m.to_record(false)); });
  EXPECT_EQ(a.final_model.embeddings, b.final_model.embeddings);
  EXPECT_EQ(a.final_model.encoder, b.final_model.encoder);
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(ra.size(), 2u);
  cfg.seed = 2;
  const auto other = train(c.vocab, c.train, c.valid, cfg, Mode::kNeglmB, spec);
  EXPECT_FALSE(other.final_model.embeddings == a.final_model.embeddings);
}

TEST(Train, NegAndNeglmShareTrainingObjective) {
  const auto c = tiny_corpus();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.k = 3;
  cfg.batch_size = 4;
  cfg.unroll = 8;
  const auto neg = train(c.vocab, c.train, c.valid, cfg, Mode::kNeg, window(6));
  const auto neglm = train(c.vocab, c.train, c.valid, cfg, Mode::kNeglm, window(6));
  EXPECT_EQ(neg.final_model.embeddings, neglm.final_model.embeddings);
  EXPECT_EQ(neg.final_model.encoder, neglm.final_model.encoder);
}

TEST(Train, AbortsOnNonFiniteLoss) {
  const auto c = tiny_corpus();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 1e300;
  cfg.batch_size = 4;
  cfg.unroll = 8;
  cfg.k = 3;
  try {
    train(c.vocab, c.train, c.valid, cfg, Mode::kNeg, window(6));
    FAIL() << "expected abort";
  } catch (const TrainingAborted& e) {
    EXPECT_TRUE(e.last_good().embeddings.all_finite());
    EXPECT_TRUE(e.last_good().encoder.all_finite());
  }
}

TEST(Train, UnigramCorrectionHelpsOnChain) {
  const auto c = tiny_corpus();
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.lr = 2.0;
  cfg.k = 5;
  cfg.batch_size = 4;
  cfg.unroll = 10;
  const auto r = train(c.vocab, c.train, c.valid, cfg, Mode::kNeglm, window(16));
  EXPECT_GT(perplexity(r.model, c.valid, Mode::kNeg), perplexity(r.model, c.valid));
}

}  // namespace
}  // namespace neglm::lm
