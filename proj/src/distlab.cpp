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

#include "neglm/distlab.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "neglm/sampling.hpp"

namespace neglm::distlab {
namespace {

void require_shape(const JointDistribution& dist, const Matrix& m) {
  if (m.rows() != dist.n_x() || m.cols() != dist.n_y())
    throw std::invalid_argument("matrix shape does not match the distribution");
}

void require_finite(const Matrix& m) {
  if (!m.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
}

// 0 log 0 = 0.
double xlogx_over(double a, double log_a, double log_b) {
  return a > 0.0 ? a * (log_a - log_b) : 0.0;
}

}  // namespace

double log_sigmoid(double z) {
  // log s(z) = -log(1 + e^{-z}) = -(max(-z, 0) + log1p(e^{-|z|}))
  return -(std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

JointDistribution::JointDistribution(Matrix p, double tolerance)
    : p_(std::move(p)) {
  if (p_.size() == 0) throw std::invalid_argument("joint distribution is empty");
  if (!p_.allFinite() || (p_.array() < 0.0).any())
    throw std::invalid_argument("joint probabilities must be finite and >= 0");
  const double total = p_.sum();
  if (std::abs(total - 1.0) > tolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "joint probabilities sum to " << total << ", not 1";
    throw std::invalid_argument(msg.str());
  }
  p_x_ = p_.rowwise().sum();
  p_y_ = p_.colwise().sum().transpose();
}

JointDistribution JointDistribution::from_weights(const Matrix& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weights must have positive mass");
  return JointDistribution(weights / total, 1e-12);
}

bool JointDistribution::full_support() const { return (p_.array() > 0.0).all(); }

JointDistribution read_joint_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("TSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x\ty\tp")
    throw std::runtime_error("TSV: header must be 'x<TAB>y<TAB>p', got '" + line + "'");

  std::map<std::string, Eigen::Index> x_ids, y_ids;
  std::vector<std::string> x_labels, y_labels;
  struct Cell {
    Eigen::Index x, y;
    double p;
  };
  std::vector<Cell> cells;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string xs, ys, ps;
    if (!std::getline(fields, xs, '\t') || !std::getline(fields, ys, '\t') ||
        !std::getline(fields, ps, '\t') || fields.rdbuf()->in_avail() > 0)
      throw std::runtime_error("TSV line " + std::to_string(line_no) +
                               ": expected three tab-separated fields");
    double p = 0.0;
    try {
      std::size_t used = 0;
      p = std::stod(ps, &used);
      if (used != ps.size()) throw std::invalid_argument(ps);
    } catch (const std::exception&) {
      throw std::runtime_error("TSV line " + std::to_string(line_no) +
                               ": bad probability '" + ps + "'");
    }
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::runtime_error("TSV line " + std::to_string(line_no) +
                               ": probability must be finite and >= 0");
    auto intern = [](auto& ids, auto& labels, const std::string& s) {
      auto [it, inserted] = ids.emplace(s, static_cast<Eigen::Index>(labels.size()));
      if (inserted) labels.push_back(s);
      return it->second;
    };
    cells.push_back({intern(x_ids, x_labels, xs), intern(y_ids, y_labels, ys), p});
  }
  if (cells.empty()) throw std::runtime_error("TSV: no rows");

  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(x_labels.size()),
                          static_cast<Eigen::Index>(y_labels.size()));
  for (const Cell& c : cells) p(c.x, c.y) += c.p;
  const double total = p.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw std::runtime_error("TSV: probabilities sum to " + std::to_string(total));
  JointDistribution dist(p / total, 1e-12);
  dist.x_labels = std::move(x_labels);
  dist.y_labels = std::move(y_labels);
  return dist;
}

JointDistribution read_joint_tsv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_joint_tsv(in);
}

void write_joint_tsv(std::ostream& out, const JointDistribution& dist) {
  auto label = [](const std::vector<std::string>& labels, Eigen::Index i) {
    return i < static_cast<Eigen::Index>(labels.size()) ? labels[i] : std::to_string(i);
  };
  out << "x\ty\tp\n";
  out.precision(17);
  for (Eigen::Index x = 0; x < dist.n_x(); ++x)
    for (Eigen::Index y = 0; y < dist.n_y(); ++y)
      if (dist.p(x, y) > 0.0)
        out << label(dist.x_labels, x) << '\t' << label(dist.y_labels, y) << '\t'
            << dist.p(x, y) << '\n';
}

FactorPair::FactorPair(Matrix x, Matrix y) : x_table(std::move(x)), y_table(std::move(y)) {
  if (x_table.cols() != y_table.cols())
    throw std::invalid_argument("factor tables must share their width");
  if (x_table.cols() == 0) throw std::invalid_argument("embedding width must be >= 1");
}

FactorPair::FactorPair(Eigen::Index n_x, Eigen::Index n_y, Eigen::Index d) {
  if (d < 1) throw std::invalid_argument("embedding width must be >= 1");
  x_table = Matrix::Zero(n_x, d);
  y_table = Matrix::Zero(n_y, d);
}

PmiMatrix pmi_matrix(const JointDistribution& dist, const ScoreConfig& cfg) {
  PmiMatrix pmi;
  pmi.values = Matrix::Zero(dist.n_x(), dist.n_y());
  pmi.support_mask = (dist.p().array() > 0.0);
  const double log_k = std::log(static_cast<double>(cfg.k));
  for (Eigen::Index x = 0; x < dist.n_x(); ++x)
    for (Eigen::Index y = 0; y < dist.n_y(); ++y)
      if (pmi.support_mask(x, y))
        pmi.values(x, y) = std::log(dist.p(x, y)) - std::log(dist.p_x()(x)) -
                           std::log(dist.p_y()(y)) - log_k;
  return pmi;
}

JointDistribution mixture_q(const JointDistribution& dist, const ScoreConfig& cfg) {
  const double k = cfg.k;
  Matrix q = (dist.p() + k * dist.independent()) / (k + 1.0);
  return JointDistribution(std::move(q), 1e-12);
}

double score(const JointDistribution& dist, const ScoreConfig& cfg, const Matrix& m) {
  require_shape(dist, m);
  require_finite(m);
  const double k = cfg.k;
  double total = 0.0;
  for (Eigen::Index y = 0; y < dist.n_y(); ++y) {
    for (Eigen::Index x = 0; x < dist.n_x(); ++x) {
      const double z = m(x, y);
      const double neg = k * dist.p_x()(x) * dist.p_y()(y);
      total += dist.p(x, y) * log_sigmoid(z) + neg * log_sigmoid(-z);
    }
  }
  return total / (k + 1.0);
}

double optimal_score(const JointDistribution& dist, const ScoreConfig& cfg) {
  const PmiMatrix pmi = pmi_matrix(dist, cfg);
  if (!pmi.full_support())
    throw std::domain_error("S(pmi) is undefined without full support");
  return score(dist, cfg, pmi.values);
}

double kl_gap(const JointDistribution& dist, const ScoreConfig& cfg, const Matrix& m) {
  require_shape(dist, m);
  require_finite(m);
  const double k = cfg.k;
  const Matrix q = (dist.p() + k * dist.independent()) / (k + 1.0);
  double total = 0.0;
  for (Eigen::Index y = 0; y < dist.n_y(); ++y) {
    for (Eigen::Index x = 0; x < dist.n_x(); ++x) {
      if (q(x, y) <= 0.0) continue;
      const double pos = dist.p(x, y);
      const double neg = k * dist.p_x()(x) * dist.p_y()(y);
      const double log_denom = std::log(pos + neg);
      // Posterior of the PMI model, p_pmi(z | x, y).
      const double a1 = pos / (pos + neg);
      const double a0 = neg / (pos + neg);
      const double log_a1 = pos > 0.0 ? std::log(pos) - log_denom : 0.0;
      const double log_a0 = neg > 0.0 ? std::log(neg) - log_denom : 0.0;
      const double cell = xlogx_over(a1, log_a1, log_sigmoid(m(x, y))) +
                          xlogx_over(a0, log_a0, log_sigmoid(-m(x, y)));
      total += q(x, y) * cell;
    }
  }
  return total;
}

Matrix posterior(const JointDistribution& dist, const ScoreConfig& cfg) {
  const double k = cfg.k;
  Matrix post = Matrix::Zero(dist.n_x(), dist.n_y());
  for (Eigen::Index x = 0; x < dist.n_x(); ++x)
    for (Eigen::Index y = 0; y < dist.n_y(); ++y) {
      const double pos = dist.p(x, y);
      if (pos > 0.0) post(x, y) = pos / (pos + k * dist.p_x()(x) * dist.p_y()(y));
    }
  return post;
}

std::pair<Matrix, Matrix> binary_joint(const JointDistribution& dist,
                                       const ScoreConfig& cfg, const Matrix& m) {
  require_shape(dist, m);
  const Matrix q = mixture_q(dist, cfg).p();
  Matrix one = q, zero = q;
  for (Eigen::Index x = 0; x < m.rows(); ++x)
    for (Eigen::Index y = 0; y < m.cols(); ++y) {
      one(x, y) = q(x, y) * sigmoid(m(x, y));
      zero(x, y) = q(x, y) * sigmoid(-m(x, y));
    }
  return {zero, one};
}

Matrix log_conditional(const JointDistribution& dist) {
  if (!dist.full_support())
    throw std::domain_error("log p(y|x) requires full support");
  Matrix out(dist.n_x(), dist.n_y());
  for (Eigen::Index x = 0; x < dist.n_x(); ++x)
    for (Eigen::Index y = 0; y < dist.n_y(); ++y)
      out(x, y) = std::log(dist.p(x, y)) - std::log(dist.p_x()(x));
  return out;
}

double cond_score(const JointDistribution& dist, const ScoreConfig& cfg, const Matrix& m) {
  require_shape(dist, m);
  require_finite(m);
  if ((dist.p_x().array() <= 0.0).any())
    throw std::domain_error("cond_score: every row needs p(x) > 0");
  if ((dist.p_y().array() <= 0.0).any())
    throw std::domain_error("cond_score: every column needs p(y) > 0");
  Matrix shifted = m;
  const double log_k = std::log(static_cast<double>(cfg.k));
  for (Eigen::Index y = 0; y < m.cols(); ++y)
    shifted.col(y).array() -= log_k + std::log(dist.p_y()(y));
  return score(dist, cfg, shifted);
}

Matrix score_gradient_m(const JointDistribution& dist, const ScoreConfig& cfg,
                        const Matrix& m) {
  require_shape(dist, m);
  const double k = cfg.k;
  Matrix g(m.rows(), m.cols());
  for (Eigen::Index y = 0; y < m.cols(); ++y)
    for (Eigen::Index x = 0; x < m.rows(); ++x) {
      const double z = m(x, y);
      g(x, y) = (dist.p(x, y) * sigmoid(-z) -
                 k * dist.p_x()(x) * dist.p_y()(y) * sigmoid(z)) /
                (k + 1.0);
    }
  return g;
}

FactorPair exact_gradient(const JointDistribution& dist, const ScoreConfig& cfg,
                          const FactorPair& factors) {
  const Matrix g = score_gradient_m(dist, cfg, factors.product());
  return FactorPair(g * factors.y_table, g.transpose() * factors.x_table);
}

FactorPair init_factors(Eigen::Index n_x, Eigen::Index n_y, Eigen::Index d, Rng& rng) {
  FactorPair f(n_x, n_y, d);
  const double bound = 0.5 / static_cast<double>(d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < n_x; ++i) f.x_table(i, j) = rng.uniform(-bound, bound);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < n_y; ++i) f.y_table(i, j) = rng.uniform(-bound, bound);
  return f;
}

ExactTrainResult train_exact(const JointDistribution& dist, const ScoreConfig& cfg,
                             const ExactTrainOptions& opts) {
  if (opts.d < 1) throw std::invalid_argument("train_exact: d must be >= 1");
  if (!(opts.lr > 0.0)) throw std::invalid_argument("train_exact: lr must be positive");
  Rng rng(opts.seed);
  ExactTrainResult result;
  result.factors = init_factors(dist.n_x(), dist.n_y(), opts.d, rng);
  double current = score(dist, cfg, result.factors.product());
  result.trajectory.push_back(current);
  double lr = opts.lr;

  for (int step = 0; step < opts.steps; ++step) {
    const Matrix gm = score_gradient_m(dist, cfg, result.factors.product());
    if (gm.cwiseAbs().maxCoeff() <= opts.gradient_tolerance) break;
    const Matrix gx = gm * result.factors.y_table;
    const Matrix gy = gm.transpose() * result.factors.x_table;

    bool accepted = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      FactorPair trial(result.factors.x_table + lr * gx, result.factors.y_table + lr * gy);
      const Matrix m = trial.product();
      if (!m.allFinite()) {
        lr *= 0.5;
        continue;
      }
      const double s = score(dist, cfg, m);
      if (!std::isfinite(s))
        throw DivergedError("train_exact: score became non-finite at step " +
                            std::to_string(step));
      if (s >= current) {
        result.factors = std::move(trial);
        current = s;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    result.trajectory.push_back(current);
    result.steps_taken = step + 1;
  }
  result.score = current;
  return result;
}

std::vector<IndexPair> sample_pairs(const JointDistribution& dist, std::size_t count,
                                    Rng& rng) {
  std::vector<double> cells(static_cast<std::size_t>(dist.p().size()));
  for (Eigen::Index x = 0; x < dist.n_x(); ++x)
    for (Eigen::Index y = 0; y < dist.n_y(); ++y)
      cells[static_cast<std::size_t>(x * dist.n_y() + y)] = dist.p(x, y);
  const auto table = sampling::from_probabilities(std::move(cells));
  std::vector<IndexPair> pairs(count);
  const auto n_y = static_cast<std::uint32_t>(dist.n_y());
  for (auto& pair : pairs) {
    const std::uint32_t cell = table.sample(rng);
    pair = {static_cast<std::int32_t>(cell / n_y), static_cast<std::int32_t>(cell % n_y)};
  }
  return pairs;
}

void accumulate_sampled_gradient(const FactorPair& factors, IndexPair pair,
                                 std::span<const std::int32_t> negatives, double scale,
                                 FactorPair& grad) {
  const auto x = factors.x_table.row(pair.x);
  {
    const auto y = factors.y_table.row(pair.y);
    const double g = scale * sigmoid(-x.dot(y));
    grad.x_table.row(pair.x) += g * y;
    grad.y_table.row(pair.y) += g * x;
  }
  for (std::int32_t u : negatives) {
    const auto y = factors.y_table.row(u);
    const double g = -scale * sigmoid(x.dot(y));
    grad.x_table.row(pair.x) += g * y;
    grad.y_table.row(u) += g * x;
  }
}

FactorPair train_sampled(std::span<const IndexPair> pairs, const ScoreConfig& cfg,
                         const sampling::NoiseDistribution& noise, Eigen::Index d,
                         const TrainConfig& opt) {
  if (pairs.empty()) throw std::invalid_argument("train_sampled: empty pair stream");
  if (d < 1) throw std::invalid_argument("train_sampled: d must be >= 1");
  Eigen::Index n_x = 0, n_y = static_cast<Eigen::Index>(noise.size());
  for (const IndexPair& p : pairs) {
    n_x = std::max<Eigen::Index>(n_x, p.x + 1);
    if (p.y < 0 || p.y >= n_y || p.x < 0)
      throw std::invalid_argument("train_sampled: pair outside the alphabets");
  }

  Rng init_rng = Rng(opt.seed).split(0);
  Rng noise_rng = Rng(opt.seed).split(1);
  FactorPair factors = init_factors(n_x, n_y, d, init_rng);
  std::vector<std::int32_t> negatives(static_cast<std::size_t>(cfg.k));
  Vector x_update(d);

  const double total = static_cast<double>(pairs.size()) * opt.epochs;
  double done = 0.0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const IndexPair& pair : pairs) {
      const double lr = opt.lr * std::max(1e-4, 1.0 - done / total);
      done += 1.0;
      for (auto& u : negatives) {
        do {
          u = static_cast<std::int32_t>(noise.sample(noise_rng));
        } while (opt.reject_positive_negatives && u == pair.y && noise.size() > 1);
      }
      // word2vec-style update: y rows move immediately, the x row after all
      // terms have been seen.
      x_update.setZero();
      auto x = factors.x_table.row(pair.x);
      {
        auto y = factors.y_table.row(pair.y);
        const double g = lr * sigmoid(-x.dot(y));
        x_update += g * y.transpose();
        y += g * x;
      }
      for (std::int32_t u : negatives) {
        auto y = factors.y_table.row(u);
        const double g = -lr * sigmoid(x.dot(y));
        x_update += g * y.transpose();
        y += g * x;
      }
      x += x_update.transpose();
    }
  }
  return factors;
}

}  // namespace neglm::distlab
