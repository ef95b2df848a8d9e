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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "neglm/optimizer.hpp"

namespace neglm::lm {
namespace {

constexpr double kInitScale = 0.05;

double log_sigmoid(double z) {
  return -(std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sum_exp(const Vector& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

// Per-word constant added to w.c in the training logit.
Vector training_offsets(const LanguageModel& model) {
  const auto n = static_cast<Eigen::Index>(model.vocab_size());
  Vector offset = Vector::Zero(n);
  if (has_bias(model.mode)) offset += model.bias().col(0);
  if (model.mode == Mode::kNce) {
    for (Eigen::Index w = 0; w < n; ++w)
      offset(w) -= model.log_z + std::log(model.k * model.noise.prob(static_cast<std::size_t>(w)));
  }
  return offset;
}

Vector test_offsets(const LanguageModel& model, Mode mode) {
  const auto n = static_cast<Eigen::Index>(model.vocab_size());
  Vector offset = Vector::Zero(n);
  if (has_bias(mode)) offset += model.bias().col(0);
  if (has_unigram_prior(mode))
    for (Eigen::Index w = 0; w < n; ++w)
      offset(w) += std::log(model.noise.prob(static_cast<std::size_t>(w)));
  return offset;
}

Matrix gather_columns(const Matrix& table, const corpus::IdMatrix& ids, Eigen::Index t) {
  Matrix out(table.cols(), ids.rows());
  for (Eigen::Index lane = 0; lane < ids.rows(); ++lane)
    out.col(lane) = table.row(ids(lane, t)).transpose();
  return out;
}

void fill_uniform(Matrix& m, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-kInitScale, kInitScale);
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kNce:
      return "nce";
    case Mode::kNeg:
      return "neg";
    case Mode::kNeglm:
      return "neglm";
    case Mode::kNeglmB:
      return "neglm-b";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "nce") return Mode::kNce;
  if (name == "neg") return Mode::kNeg;
  if (name == "neglm") return Mode::kNeglm;
  if (name == "neglm-b" || name == "neglm_b") return Mode::kNeglmB;
  throw std::invalid_argument("unknown mode: " + std::string(name));
}

bool has_bias(Mode mode) { return mode == Mode::kNce || mode == Mode::kNeglmB; }
bool has_unigram_prior(Mode mode) { return mode == Mode::kNeglm || mode == Mode::kNeglmB; }

LanguageModel make_model(const corpus::Vocabulary& vocab, Mode mode,
                         const encoder::EncoderSpec& spec, int k, double alpha,
                         std::uint64_t seed) {
  spec.validate();
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  LanguageModel model;
  model.mode = mode;
  model.vocab = vocab;
  model.k = k;
  model.alpha = alpha;
  model.noise = sampling::build_noise(vocab.counts(), alpha);
  model.encoder_spec = spec;
  model.seed = seed;
  model.metadata["rng"] = std::string(Rng::kAlgorithm);
  model.metadata["encoder.dropout_placement"] = std::string(encoder::kDropoutPlacement);

  Rng rng = Rng(seed).split(0);
  const auto n = static_cast<Eigen::Index>(vocab.size());
  fill_uniform(model.embeddings[model.embeddings.add("input_table", n, spec.input_dim)], rng);
  fill_uniform(model.embeddings[model.embeddings.add("word_table", n, spec.hidden_dim)], rng);
  Matrix& bias = model.embeddings[model.embeddings.add("bias", n, 1)];
  if (mode == Mode::kNce) bias.setConstant(-std::log(static_cast<double>(n)));
  model.encoder = encoder::init_params(spec, rng);
  return model;
}

double classifier_logit(const LanguageModel& model, TokenId w, const Vector& c) {
  if (w < 0 || static_cast<std::size_t>(w) >= model.vocab_size())
    throw std::out_of_range("word id " + std::to_string(w) + " outside the vocabulary");
  double logit = model.word_table().row(w).dot(c);
  if (has_bias(model.mode)) logit += model.bias()(w, 0);
  if (model.mode == Mode::kNce)
    logit -= model.log_z + std::log(model.k * model.noise.prob(static_cast<std::size_t>(w)));
  return logit;
}

NegativeSamples draw_negatives(const sampling::NoiseDistribution& noise,
                               const corpus::IdMatrix& targets, int k, Rng& rng,
                               bool reject_positive, bool share) {
  NegativeSamples neg;
  neg.k = k;
  neg.batch = targets.rows();
  const Eigen::Index steps = targets.cols();
  neg.ids.resize(static_cast<std::size_t>(steps * neg.batch * k));
  auto draw = [&](TokenId positive) {
    TokenId u;
    do {
      u = static_cast<TokenId>(noise.sample(rng));
    } while (reject_positive && u == positive && noise.prob(static_cast<std::size_t>(u)) < 1.0);
    return u;
  };
  if (share) {
    std::vector<TokenId> shared(static_cast<std::size_t>(k));
    for (auto& u : shared) u = draw(-1);
    for (std::size_t i = 0; i < neg.ids.size(); ++i) neg.ids[i] = shared[i % shared.size()];
    return neg;
  }
  std::size_t pos = 0;
  for (Eigen::Index t = 0; t < steps; ++t)
    for (Eigen::Index lane = 0; lane < neg.batch; ++lane)
      for (int i = 0; i < k; ++i) neg.ids[pos++] = draw(targets(lane, t));
  return neg;
}

LossResult batch_loss(const LanguageModel& model, std::span<const Matrix> contexts,
                      const corpus::IdMatrix& targets, const NegativeSamples& negatives) {
  const Eigen::Index steps = targets.cols();
  const Eigen::Index batch = targets.rows();
  if (static_cast<Eigen::Index>(contexts.size()) != steps)
    throw std::invalid_argument("batch_loss: one context block per step is required");
  const Vector offset = training_offsets(model);
  const Matrix& words = model.word_table();
  const bool train_bias = has_bias(model.mode);
  const double scale = 1.0 / static_cast<double>(steps * batch);

  LossResult out;
  out.d_embeddings = model.embeddings.zeros_like();
  Matrix& d_words = out.d_embeddings[1];
  Matrix& d_bias = out.d_embeddings[2];
  out.d_contexts.reserve(static_cast<std::size_t>(steps));
  double total = 0.0;

  auto term = [&](TokenId w, const auto& c, auto&& d_c, double sign) {
    // sign = +1 for the observed word, -1 for a negative.
    const double z = words.row(w).dot(c) + offset(w);
    total -= log_sigmoid(sign * z);
    const double dz = -sign * sigmoid(-sign * z) * scale;
    d_c += dz * words.row(w).transpose();
    d_words.row(w) += dz * c.transpose();
    if (train_bias) d_bias(w, 0) += dz;
  };

  for (Eigen::Index t = 0; t < steps; ++t) {
    const Matrix& ctx = contexts[static_cast<std::size_t>(t)];
    Matrix d_ctx = Matrix::Zero(ctx.rows(), batch);
    for (Eigen::Index lane = 0; lane < batch; ++lane) {
      const auto c = ctx.col(lane);
      auto d_c = d_ctx.col(lane);
      term(targets(lane, t), c, d_c, 1.0);
      for (int i = 0; i < negatives.k; ++i) term(negatives.at(t, lane, i), c, d_c, -1.0);
    }
    out.d_contexts.push_back(std::move(d_ctx));
  }
  out.loss = total * scale;
  return out;
}

WindowResult window_objective(const LanguageModel& model, encoder::EncoderState& state,
                              const corpus::IdMatrix& inputs, const corpus::IdMatrix& targets,
                              const NegativeSamples& negatives, encoder::Phase phase,
                              Rng* dropout_rng) {
  encoder::EncoderTrace trace = encoder::begin_trace(model.encoder, state);
  std::vector<Matrix> contexts;
  contexts.reserve(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index t = 0; t < inputs.cols(); ++t) {
    contexts.push_back(encoder::forward(model.encoder_spec, model.encoder, state,
                                        gather_columns(model.input_table(), inputs, t), phase,
                                        dropout_rng, &trace));
  }
  LossResult loss = batch_loss(model, contexts, targets, negatives);
  encoder::EncoderGradients enc =
      encoder::backward(model.encoder_spec, model.encoder, trace, loss.d_contexts);

  WindowResult out;
  out.loss = loss.loss;
  out.d_embeddings = std::move(loss.d_embeddings);
  Matrix& d_input = out.d_embeddings[0];
  for (Eigen::Index t = 0; t < inputs.cols(); ++t)
    for (Eigen::Index lane = 0; lane < inputs.rows(); ++lane)
      d_input.row(inputs(lane, t)) += enc.inputs[static_cast<std::size_t>(t)].col(lane).transpose();
  out.d_encoder = std::move(enc.params);
  return out;
}

Vector test_scores(const LanguageModel& model, const Vector& c, std::optional<Mode> eval_mode) {
  return model.word_table() * c + test_offsets(model, eval_mode.value_or(model.mode));
}

Vector conditional_log_probs(const LanguageModel& model, const Vector& c,
                             std::optional<Mode> eval_mode) {
  Vector s = test_scores(model, c, eval_mode);
  const double lse = log_sum_exp(s);
  s.array() -= lse;
  return s;
}

Evaluation evaluate(const LanguageModel& model, std::span<const TokenId> ids,
                    std::optional<Mode> eval_mode) {
  if (ids.size() < 2) throw std::invalid_argument("evaluate: need at least two tokens");
  const Vector offset = test_offsets(model, eval_mode.value_or(model.mode));
  encoder::EncoderState state = encoder::initial_state(model.encoder_spec, 1);
  double nll = 0.0;
  for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
    const Matrix x = model.input_table().row(ids[t]).transpose();
    const Matrix c = encoder::forward(model.encoder_spec, model.encoder, state, x,
                                      encoder::Phase::kEval);
    const Vector s = model.word_table() * c.col(0) + offset;
    nll -= s(ids[t + 1]) - log_sum_exp(s);
  }
  Evaluation out;
  out.tokens = ids.size() - 1;
  out.mean_log_loss = nll / static_cast<double>(out.tokens);
  out.perplexity = std::exp(out.mean_log_loss);
  return out;
}

std::string EpochMetrics::to_record(bool include_time) const {
  char buf[256];
  int n = std::snprintf(buf, sizeof buf, "epoch=%d train_loss=%.17g valid_ppl=%.17g lr=%.17g",
                        epoch, train_loss, valid_perplexity, lr);
  if (include_time)
    std::snprintf(buf + n, sizeof buf - static_cast<std::size_t>(n), " wall_time=%.3f",
                  wall_seconds);
  return buf;
}

TrainResult train(const corpus::Vocabulary& vocab, std::span<const TokenId> train_ids,
                  std::span<const TokenId> valid_ids, const TrainConfig& config, Mode mode,
                  const encoder::EncoderSpec& spec,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  LanguageModel model = make_model(vocab, mode, spec, config.k, config.alpha, config.seed);
  model.log_z = config.log_z;
  const corpus::BatchPlan plan = corpus::make_batches(train_ids, config.batch_size, config.unroll,
                                                      config.drop_partial_window);
  Rng negative_rng = Rng(config.seed).split(1);
  Rng dropout_rng = Rng(config.seed).split(2);
  auto optimizer = make_optimizer(config);

  TrainResult result;
  result.model = model;
  double best = std::numeric_limits<double>::infinity();
  const bool has_valid = valid_ids.size() >= 2;
  const auto started = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    encoder::EncoderState state = encoder::initial_state(spec, config.batch_size);
    double loss_sum = 0.0;
    double token_count = 0.0;
    const double epoch_lr = optimizer->learning_rate();
    for (std::size_t w = 0; w < plan.windows().size(); ++w) {
      const corpus::IdMatrix inputs = plan.inputs(w);
      const corpus::IdMatrix targets = plan.targets(w);
      const NegativeSamples negatives =
          draw_negatives(model.noise, targets, config.k, negative_rng,
                         config.reject_positive_negatives, config.share_negatives);
      WindowResult step = window_objective(model, state, inputs, targets, negatives,
                                           encoder::Phase::kTrain, &dropout_rng);
      if (!std::isfinite(step.loss))
        throw TrainingAborted("non-finite training loss in epoch " + std::to_string(epoch) +
                                  ", window " + std::to_string(w),
                              result.model, epoch);
      ParamSet* grads[] = {&step.d_embeddings, &step.d_encoder};
      clip_global_norm(grads, config.clip_norm);
      ParamSet* params[] = {&model.embeddings, &model.encoder};
      const ParamSet* const_grads[] = {&step.d_embeddings, &step.d_encoder};
      optimizer->step(params, const_grads);
      const double n = static_cast<double>(targets.size());
      loss_sum += step.loss * n;
      token_count += n;
    }
    if (!model.embeddings.all_finite() || !model.encoder.all_finite())
      throw TrainingAborted("non-finite parameters after epoch " + std::to_string(epoch),
                            result.model, epoch);

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / token_count;
    m.valid_perplexity = has_valid ? evaluate(model, valid_ids).perplexity
                                   : std::numeric_limits<double>::quiet_NaN();
    m.lr = epoch_lr;
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
    if (!has_valid || m.valid_perplexity < best) {
      best = has_valid ? m.valid_perplexity : best;
      result.model = model;
      result.best_epoch = epoch;
    }
    optimizer->end_epoch(epoch);
  }
  result.final_model = std::move(model);
  return result;
}

RankAugmentReport rank_augment_check(const RankAugmentInput& input, Augmentation augmentation) {
  const Eigen::Index n_words = input.word_table.rows();
  const Eigen::Index d = input.word_table.cols();
  if (input.contexts.cols() != d || input.bias.size() != n_words ||
      input.noise_probs.size() != n_words)
    throw std::invalid_argument("rank_augment_check: inconsistent shapes");

  Matrix words_aug(n_words, d + 1);
  words_aug << input.word_table, Vector::Ones(n_words);

  RankAugmentReport report;
  for (Eigen::Index c = 0; c < input.contexts.rows(); ++c) {
    const Vector ctx = input.contexts.row(c).transpose();
    const Vector raw = input.word_table * ctx + input.bias;
    const double log_z = log_sum_exp(raw);
    Vector ctx_aug(d + 1);
    ctx_aug << ctx, (augmentation == Augmentation::kExact ? -log_z : 0.0);
    for (Eigen::Index w = 0; w < n_words; ++w) {
      const double noise_term = std::log(input.k * input.noise_probs(w));
      const double with_z = sigmoid(raw(w) - log_z - noise_term);
      // Z_c = 1 in the augmented model, so no normalizer term appears.
      const double augmented = sigmoid(words_aug.row(w).dot(ctx_aug) + input.bias(w) - noise_term);
      report.max_deviation = std::max(report.max_deviation, std::abs(with_z - augmented));
    }
  }
  report.passed = report.max_deviation <= 1e-12;
  return report;
}

}  // namespace neglm::lm
