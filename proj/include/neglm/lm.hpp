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

// Unnormalized language models trained with a binary noise-vs-data
// objective. The four modes share one training loop:
//
//   mode     training logit                         test-time scores
//   NCE      w.c + b_w - log Z - log(k p_n(w))      w.c + b_w
//   NEG      w.c                                    w.c
//   NEGLM    w.c                                    w.c + log p_n(w)
//   NEGLM_B  w.c + b_w                              w.c + b_w + log p_n(w)
//
// where p_n = p^alpha is the smoothed unigram used for negatives and log Z
// is a constant (0 by default, i.e. Z_c = 1). Test-time scores are
// normalized with a full-vocabulary softmax.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "neglm/corpus.hpp"
#include "neglm/encoder.hpp"
#include "neglm/params.hpp"
#include "neglm/rng.hpp"
#include "neglm/sampling.hpp"
#include "neglm/train_config.hpp"

namespace neglm::lm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using corpus::TokenId;

enum class Mode { kNce, kNeg, kNeglm, kNeglmB };

std::string_view to_string(Mode mode);
/// Accepts nce, neg, neglm, neglm-b.
Mode parse_mode(std::string_view name);

bool has_bias(Mode mode);
bool has_unigram_prior(Mode mode);

struct LanguageModel {
  Mode mode = Mode::kNeglm;
  corpus::Vocabulary vocab;
  /// p^alpha over the vocabulary; rebuilt from vocab counts and alpha.
  sampling::NoiseDistribution noise;
  int k = 1;
  double alpha = sampling::kDefaultAlpha;
  /// NCE normalizer log Z_c, shared by all contexts.
  double log_z = 0.0;
  encoder::EncoderSpec encoder_spec;
  /// "input_table" (|V| x input_dim), "word_table" (|V| x hidden_dim),
  /// "bias" (|V| x 1, zero and untrained for NEG and NEGLM).
  ParamSet embeddings;
  ParamSet encoder;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  /// Free-form provenance (generator algorithm, dropout placement, ...).
  std::map<std::string, std::string> metadata;

  std::size_t vocab_size() const { return vocab.size(); }
  Matrix& input_table() { return embeddings[0]; }
  const Matrix& input_table() const { return embeddings[0]; }
  Matrix& word_table() { return embeddings[1]; }
  const Matrix& word_table() const { return embeddings[1]; }
  Matrix& bias() { return embeddings[2]; }
  const Matrix& bias() const { return embeddings[2]; }
};

/// Fresh parameters: tables and encoder uniform in [-0.05, 0.05], bias
/// -log|V| for NCE and 0 otherwise.
LanguageModel make_model(const corpus::Vocabulary& vocab, Mode mode,
                         const encoder::EncoderSpec& spec, int k, double alpha,
                         std::uint64_t seed);

/// Training-time classifier logit of word w against context c.
/// Throws std::out_of_range for an unknown word id.
double classifier_logit(const LanguageModel& model, TokenId w, const Vector& c);

/// k negatives for each (time step, lane) of a window, laid out
/// [(t * batch + lane) * k + i].
struct NegativeSamples {
  int k = 0;
  Eigen::Index batch = 0;
  std::vector<TokenId> ids;

  TokenId at(Eigen::Index t, Eigen::Index lane, int i) const {
    return ids[static_cast<std::size_t>((t * batch + lane) * k + i)];
  }
};

NegativeSamples draw_negatives(const sampling::NoiseDistribution& noise,
                               const corpus::IdMatrix& targets, int k, Rng& rng,
                               bool reject_positive = false, bool share = false);

struct LossResult {
  double loss = 0.0;  // mean per predicted token
  std::vector<Matrix> d_contexts;  // hidden_dim x batch per step
  ParamSet d_embeddings;           // word_table and bias rows touched
};

/// Negative log-likelihood of the binary classifier, averaged per token:
///   -[log s(logit(w, c)) + sum_i log s(-logit(u_i, c))].
/// contexts[t] is hidden_dim x batch; targets is batch x T.
LossResult batch_loss(const LanguageModel& model, std::span<const Matrix> contexts,
                      const corpus::IdMatrix& targets, const NegativeSamples& negatives);

struct WindowResult {
  double loss = 0.0;
  ParamSet d_embeddings;
  ParamSet d_encoder;
};

/// Encoder forward over one unroll window from `state` (advanced in place),
/// batch_loss, then truncated backward into both parameter sets.
WindowResult window_objective(const LanguageModel& model, encoder::EncoderState& state,
                              const corpus::IdMatrix& inputs, const corpus::IdMatrix& targets,
                              const NegativeSamples& negatives, encoder::Phase phase,
                              Rng* dropout_rng);

/// Test-time scores for the given mode (defaults to model.mode).
Vector test_scores(const LanguageModel& model, const Vector& c,
                   std::optional<Mode> eval_mode = std::nullopt);

/// log p(. | c) over the full vocabulary.
Vector conditional_log_probs(const LanguageModel& model, const Vector& c,
                             std::optional<Mode> eval_mode = std::nullopt);

struct Evaluation {
  double perplexity = 0.0;
  double mean_log_loss = 0.0;  // nats per predicted token
  std::size_t tokens = 0;
};

/// Chain-rule evaluation of ids[1..] given their left contexts, with state
/// carried across the whole stream. Throws std::invalid_argument when fewer
/// than two tokens are given.
Evaluation evaluate(const LanguageModel& model, std::span<const TokenId> ids,
                    std::optional<Mode> eval_mode = std::nullopt);

inline double perplexity(const LanguageModel& model, std::span<const TokenId> ids,
                         std::optional<Mode> eval_mode = std::nullopt) {
  return evaluate(model, ids, eval_mode).perplexity;
}

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_perplexity = 0.0;
  double wall_seconds = 0.0;
  double lr = 0.0;

  /// `epoch=.. train_loss=.. valid_ppl=.. lr=..`, plus wall_time when
  /// include_time. Values use round-trip precision.
  std::string to_record(bool include_time = true) const;
};

/// Thrown when the training loss becomes non-finite. Carries the best model
/// seen before the failure (the initial model if no epoch finished).
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, LanguageModel last_good, int epoch)
      : std::runtime_error(what), last_good_(std::move(last_good)), epoch_(epoch) {}
  const LanguageModel& last_good() const { return last_good_; }
  int epoch() const { return epoch_; }

 private:
  LanguageModel last_good_;
  int epoch_;
};

struct TrainResult {
  LanguageModel model;  // best validation perplexity
  LanguageModel final_model;
  int best_epoch = 0;
  std::vector<EpochMetrics> metrics;
};

/// Minibatch training over batch_size contiguous streams with truncated
/// BPTT. Gradients are clipped to a global norm of config.clip_norm before
/// every update. Fully determined by (data, config, mode, spec).
TrainResult train(const corpus::Vocabulary& vocab, std::span<const TokenId> train_ids,
                  std::span<const TokenId> valid_ids, const TrainConfig& config, Mode mode,
                  const encoder::EncoderSpec& spec,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Word side and context side of an NCE model with exact per-context
/// normalizers log Z_c = log sum_w exp(w.c + b_w).
struct RankAugmentInput {
  Matrix word_table;  // |V| x d
  Vector bias;        // |V|
  Matrix contexts;    // n x d
  int k = 1;
  Vector noise_probs;  // |V|
};

enum class Augmentation { kExact, kDropNormalizer };

struct RankAugmentReport {
  bool passed = false;
  double max_deviation = 0.0;
};

/// Compares sigma(w.c + b_w - log Z_c - log(k p_n(w))) against the same
/// classifier built from (d+1)-dimensional vectors (w, 1) and
/// (c, -log Z_c) with Z_c = 1. Passes when every probability agrees to
/// within 1e-12.
RankAugmentReport rank_augment_check(const RankAugmentInput& input,
                                     Augmentation augmentation = Augmentation::kExact);

}  // namespace neglm::lm
