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

// Exact small-alphabet laboratory for negative-sampling embeddings of a
// discrete joint distribution p(x, y).
//
// The embedding score of a matrix m is
//   S(m) = sum_{x,y} [p(x,y) log s(m) + k p(x)p(y) log s(-m)] / (k+1)
// with s the logistic sigmoid. Its unconstrained maximizer is the shifted
// PMI matrix log p(x,y)/(p(x)p(y)) - log k, and S(pmi) - S(m) equals the
// q-weighted KL divergence between the binary posteriors induced by pmi and
// by m.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neglm/rng.hpp"
#include "neglm/train_config.hpp"

namespace neglm::sampling {
class NoiseDistribution;
}

namespace neglm::distlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Probability table p(x, y) over two finite alphabets.
class JointDistribution {
 public:
  /// Throws std::invalid_argument unless entries are >= 0 and sum to 1
  /// within `tolerance`.
  explicit JointDistribution(Matrix p, double tolerance = 1e-12);

  /// Normalizes nonnegative weights into a distribution.
  static JointDistribution from_weights(const Matrix& weights);

  Eigen::Index n_x() const { return p_.rows(); }
  Eigen::Index n_y() const { return p_.cols(); }
  const Matrix& p() const { return p_; }
  double p(Eigen::Index x, Eigen::Index y) const { return p_(x, y); }
  const Vector& p_x() const { return p_x_; }
  const Vector& p_y() const { return p_y_; }

  /// p(x) p(y) as an n_x by n_y matrix.
  Matrix independent() const { return p_x_ * p_y_.transpose(); }

  bool full_support() const;

  /// Optional labels, set by the TSV reader.
  std::vector<std::string> x_labels;
  std::vector<std::string> y_labels;

 private:
  Matrix p_;
  Vector p_x_;
  Vector p_y_;
};

/// Parses `x<TAB>y<TAB>p` rows after a header line. Alphabets are the
/// distinct labels in order of first appearance. Throws std::runtime_error
/// on malformed input or when the mass is not 1 within 1e-9.
JointDistribution read_joint_tsv(std::istream& in);
JointDistribution read_joint_tsv_file(const std::string& path);
void write_joint_tsv(std::ostream& out, const JointDistribution& dist);

struct ScoreConfig {
  int k = 1;

  explicit ScoreConfig(int k_ = 1) : k(k_) {
    if (k < 1) throw std::invalid_argument("ScoreConfig: k must be >= 1");
  }
};

/// Two embedding tables whose inner products form m = x_table * y_table^T.
struct FactorPair {
  Matrix x_table;
  Matrix y_table;

  FactorPair() = default;
  FactorPair(Matrix x, Matrix y);
  /// Zero-initialized tables. Throws when d == 0.
  FactorPair(Eigen::Index n_x, Eigen::Index n_y, Eigen::Index d);

  Eigen::Index d() const { return x_table.cols(); }
  Matrix product() const { return x_table * y_table.transpose(); }
};

/// Shifted PMI. Cells where p(x,y) == 0 are masked out; their stored value
/// is 0 and carries no meaning.
struct PmiMatrix {
  Matrix values;
  Mask support_mask;

  bool full_support() const { return support_mask.all(); }
};

/// log(sigmoid(z)) without overflow for large |z|.
double log_sigmoid(double z);
double sigmoid(double z);

PmiMatrix pmi_matrix(const JointDistribution& dist, const ScoreConfig& cfg);

/// q(x,y) = (p(x,y) + k p(x)p(y)) / (k+1).
JointDistribution mixture_q(const JointDistribution& dist,
                            const ScoreConfig& cfg);

/// S(m). Throws std::invalid_argument on shape mismatch or non-finite m.
double score(const JointDistribution& dist, const ScoreConfig& cfg,
             const Matrix& m);

/// S(pmi). Throws std::domain_error unless the distribution has full support.
double optimal_score(const JointDistribution& dist, const ScoreConfig& cfg);

/// Conditional KL divergence sum_{x,y} q(x,y) KL(p_pmi(.|x,y) || p_m(.|x,y))
/// evaluated from the binary posteriors directly, without going through S.
double kl_gap(const JointDistribution& dist, const ScoreConfig& cfg,
              const Matrix& m);

/// p_pmi(1 | x, y) = p(x,y) / (p(x,y) + k p(x)p(y)).
Matrix posterior(const JointDistribution& dist, const ScoreConfig& cfg);

/// Binary joint p_m(x, y, z) = q(x,y) * [z ? s(m) : 1 - s(m)], returned as
/// the pair (z = 0 table, z = 1 table).
std::pair<Matrix, Matrix> binary_joint(const JointDistribution& dist,
                                       const ScoreConfig& cfg,
                                       const Matrix& m);

/// S_cond(m) = sum f_{x,y}(m(x,y) - log(k p(y))); maximal at m = log p(y|x).
/// The shift uses the marginal of the predicted variable y, as the LM logit does.
/// Throws std::domain_error if some p(x) or p(y) == 0.
double cond_score(const JointDistribution& dist, const ScoreConfig& cfg,
                  const Matrix& m);

/// log p(y | x). Throws std::domain_error without full support.
Matrix log_conditional(const JointDistribution& dist);

/// dS/dm, the per-cell derivative of the score.
Matrix score_gradient_m(const JointDistribution& dist, const ScoreConfig& cfg,
                        const Matrix& m);

/// Gradient of S with respect to both factor tables.
FactorPair exact_gradient(const JointDistribution& dist,
                          const ScoreConfig& cfg, const FactorPair& factors);

/// Uniform on [-0.5/d, 0.5/d].
FactorPair init_factors(Eigen::Index n_x, Eigen::Index n_y, Eigen::Index d,
                        Rng& rng);

struct ExactTrainOptions {
  Eigen::Index d = 1;
  int steps = 10000;
  double lr = 50.0;
  std::uint64_t seed = 0;
  /// Stop once the max |dS/dm| falls below this value.
  double gradient_tolerance = 0.0;
  int max_halvings = 30;
};

struct ExactTrainResult {
  FactorPair factors;
  double score = 0.0;
  int steps_taken = 0;
  /// Scores after each accepted step, starting with the initial score.
  std::vector<double> trajectory;
};

/// Thrown when the score becomes non-finite.
class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full-batch gradient ascent on S with step halving: a step that lowers
/// the score is retried at half the learning rate, up to max_halvings times.
/// When no halving helps, training stops.
ExactTrainResult train_exact(const JointDistribution& dist,
                             const ScoreConfig& cfg,
                             const ExactTrainOptions& opts);

struct IndexPair {
  std::int32_t x;
  std::int32_t y;
};

/// i.i.d. draws from p(x, y) via an alias table over cells.
std::vector<IndexPair> sample_pairs(const JointDistribution& dist,
                                    std::size_t count, Rng& rng);

/// Per-pair gradient of the sampled objective
///   log s(x.y) + sum_i log s(-x.y_i)
/// added into `grad` scaled by `scale`. Only rows x, y and y_i are touched.
void accumulate_sampled_gradient(const FactorPair& factors, IndexPair pair,
                                 std::span<const std::int32_t> negatives,
                                 double scale, FactorPair& grad);

/// Stochastic ascent on the sampled objective. Each pair contributes one
/// positive term and cfg.k negatives drawn from `noise`. The learning rate
/// decays linearly from opt.lr to opt.lr * 1e-4 across all updates.
FactorPair train_sampled(std::span<const IndexPair> pairs,
                         const ScoreConfig& cfg,
                         const sampling::NoiseDistribution& noise,
                         Eigen::Index d, const TrainConfig& opt);

}  // namespace neglm::distlab
