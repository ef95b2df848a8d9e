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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include <boost/math/distributions/chi_squared.hpp>

#include "neglm/cli/commands.hpp"
#include "neglm/cli/run_config.hpp"
#include "neglm/distlab.hpp"
#include "neglm/encoder.hpp"
#include "neglm/sampling.hpp"

namespace neglm::cli {
namespace {

using distlab::JointDistribution;
using distlab::Matrix;
using distlab::ScoreConfig;

JointDistribution random_distribution(Eigen::Index n_x, Eigen::Index n_y, Rng& rng,
                                      double zero_fraction = 0.0) {
  Matrix w(n_x, n_y);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) = rng.uniform() < zero_fraction ? 0.0 : -std::log(1.0 - rng.uniform());
  if (w.sum() <= 0.0) w(0) = 1.0;
  return JointDistribution::from_weights(w);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

Eigen::Index random_size(int max_size, Rng& rng) {
  return 1 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(max_size)));
}

CheckResult finish(std::string name, std::size_t n, double worst, double tolerance) {
  return {std::move(name), n, worst, tolerance, worst <= tolerance};
}

}  // namespace

std::string CheckResult::to_record() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "check=%s instances=%zu worst=%.6g tolerance=%.3g status=%s",
                name.c_str(), instances, worst, tolerance, passed ? "pass" : "FAIL");
  return buf;
}

std::vector<CheckResult> run_verification(const VerifyOptions& options) {
  std::vector<CheckResult> results;
  const Rng root(options.seed);
  const int n = std::max(1, options.instances);
  const int max_size = std::max(1, options.max_size);

  {  // S(pmi) - S(m) against the directly computed conditional KL.
    Rng rng = root.split(1);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto dist = random_distribution(random_size(max_size, rng), random_size(max_size, rng), rng);
      const ScoreConfig cfg(1 + static_cast<int>(rng.below(10)));
      const Matrix m = random_matrix(dist.n_x(), dist.n_y(), 3.0, rng);
      const double lhs = distlab::optimal_score(dist, cfg) - distlab::score(dist, cfg, m);
      worst = std::max(worst, std::abs(lhs - distlab::kl_gap(dist, cfg, m)));
    }
    results.push_back(finish("score_gap_identity", static_cast<std::size_t>(n), worst, 1e-10));
  }
  {  // kl_gap >= 0 including distributions with empty cells.
    Rng rng = root.split(2);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto dist = random_distribution(random_size(max_size, rng), random_size(max_size, rng),
                                            rng, 0.3);
      const ScoreConfig cfg(1 + static_cast<int>(rng.below(10)));
      worst = std::max(worst, -distlab::kl_gap(dist, cfg, random_matrix(dist.n_x(), dist.n_y(), 3.0, rng)));
    }
    results.push_back(finish("kl_nonnegative", static_cast<std::size_t>(n), worst, 0.0));
  }
  {  // Perturbing the PMI matrix never raises the score.
    Rng rng = root.split(3);
    double worst = -std::numeric_limits<double>::infinity();
    const int dists = std::max(1, n / 10);
    for (int i = 0; i < dists; ++i) {
      const auto dist = random_distribution(random_size(max_size, rng), random_size(max_size, rng), rng);
      const ScoreConfig cfg(1 + static_cast<int>(rng.below(10)));
      const Matrix pmi = distlab::pmi_matrix(dist, cfg).values;
      const double best = distlab::score(dist, cfg, pmi);
      for (int dir = 0; dir < 20; ++dir) {
        const Matrix delta = random_matrix(dist.n_x(), dist.n_y(), 1.0, rng);
        for (double eps : {1e-2, 1e-1, 1.0})
          worst = std::max(worst, distlab::score(dist, cfg, pmi + eps * delta) - best);
      }
    }
    results.push_back(finish("pmi_optimality", static_cast<std::size_t>(dists) * 60, worst, 0.0));
  }
  {  // logit(posterior) = pmi and sum_z p_m(x, y, z) = q(x, y).
    Rng rng = root.split(4);
    double worst_logit = 0.0, worst_marginal = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto dist = random_distribution(random_size(max_size, rng), random_size(max_size, rng), rng);
      const ScoreConfig cfg(1 + static_cast<int>(rng.below(10)));
      const Matrix post = distlab::posterior(dist, cfg);
      const Matrix pmi = distlab::pmi_matrix(dist, cfg).values;
      const Matrix logit = (post.array() / (1.0 - post.array())).log().matrix();
      worst_logit = std::max(worst_logit, (logit - pmi).cwiseAbs().maxCoeff());
      const auto [zero, one] =
          distlab::binary_joint(dist, cfg, random_matrix(dist.n_x(), dist.n_y(), 3.0, rng));
      worst_marginal = std::max(
          worst_marginal, (zero + one - distlab::mixture_q(dist, cfg).p()).cwiseAbs().maxCoeff());
    }
    results.push_back(finish("posterior_logit", static_cast<std::size_t>(n), worst_logit, 1e-10));
    results.push_back(finish("mixture_marginal", static_cast<std::size_t>(n), worst_marginal, 1e-12));
  }
  {  // Analytic factor gradient against central differences.
    Rng rng = root.split(5);
    double worst = 0.0;
    const int cases = std::max(1, n / 20);
    constexpr double h = 1e-5;
    for (int i = 0; i < cases; ++i) {
      const auto dist = random_distribution(random_size(6, rng), random_size(6, rng), rng);
      const ScoreConfig cfg(1 + static_cast<int>(rng.below(5)));
      const Eigen::Index d = random_size(4, rng);
      distlab::FactorPair f(random_matrix(dist.n_x(), d, 1.0, rng),
                            random_matrix(dist.n_y(), d, 1.0, rng));
      distlab::FactorPair g = distlab::exact_gradient(dist, cfg, f);
      if (options.corrupt_gradient && i == 0) g.x_table(0, 0) = -g.x_table(0, 0);
      for (Matrix* table : {&f.x_table, &f.y_table}) {
        const Matrix& analytic = table == &f.x_table ? g.x_table : g.y_table;
        for (Eigen::Index j = 0; j < table->size(); ++j) {
          const double saved = (*table)(j);
          (*table)(j) = saved + h;
          const double up = distlab::score(dist, cfg, f.product());
          (*table)(j) = saved - h;
          const double down = distlab::score(dist, cfg, f.product());
          (*table)(j) = saved;
          worst = std::max(worst, encoder::relative_error(analytic(j), (up - down) / (2 * h)));
        }
      }
    }
    results.push_back(finish("exact_gradient", static_cast<std::size_t>(cases), worst, 1e-6));
  }
  {  // S_cond is stationary at m = log p(y|x).
    Rng rng = root.split(6);
    double worst = 0.0;
    const int cases = std::max(1, n / 20);
    constexpr double h = 1e-5;
    for (int i = 0; i < cases; ++i) {
      const auto dist = random_distribution(random_size(max_size, rng), random_size(max_size, rng), rng);
      const ScoreConfig cfg(1 + static_cast<int>(rng.below(5)));
      Matrix m = distlab::log_conditional(dist);
      for (Eigen::Index j = 0; j < m.size(); ++j) {
        const double saved = m(j);
        m(j) = saved + h;
        const double up = distlab::cond_score(dist, cfg, m);
        m(j) = saved - h;
        const double down = distlab::cond_score(dist, cfg, m);
        m(j) = saved;
        worst = std::max(worst, std::abs(up - down) / (2 * h));
      }
    }
    results.push_back(finish("cond_score_stationary", static_cast<std::size_t>(cases), worst, 1e-8));
  }
  {  // Exact-trainer recovery of the PMI matrix at full rank.
    Rng rng = root.split(7);
    double worst_cell = 0.0, worst_kl = 0.0;
    const int cases = 5;
    for (int i = 0; i < cases; ++i) {
      const auto dist = random_distribution(5, 5, rng);
      const ScoreConfig cfg(1);
      distlab::ExactTrainOptions opts;
      opts.d = 5;
      opts.seed = rng.next_u64();
      const auto trained = distlab::train_exact(dist, cfg, opts);
      const Matrix m = trained.factors.product();
      worst_cell = std::max(worst_cell,
                            (m - distlab::pmi_matrix(dist, cfg).values).cwiseAbs().maxCoeff());
      worst_kl = std::max(worst_kl, distlab::kl_gap(dist, cfg, m));
    }
    results.push_back(finish("full_rank_recovery_cell", cases, worst_cell, 1e-3));
    results.push_back(finish("full_rank_recovery_kl", cases, worst_kl, 1e-6));
  }
  {  // Alias tables reproduce p^alpha; draws pass a chi-square test.
    Rng rng = root.split(8);
    double worst = 0.0;
    for (std::size_t size : {std::size_t{1}, std::size_t{7}, std::size_t{1000}, std::size_t{100000}}) {
      std::vector<double> counts(size);
      for (auto& c : counts) c = static_cast<double>(rng.below(1000));
      counts[0] += 1.0;
      const auto noise = sampling::build_noise(counts, rng.uniform());
      const auto mass = noise.reconstruct();
      for (std::size_t w = 0; w < size; ++w)
        worst = std::max(worst, std::abs(mass[w] - noise.prob(w)));
    }
    results.push_back(finish("alias_reconstruction", 4, worst, 1e-12));

    const double counts[] = {9.0, 1.0, 4.0, 0.5, 16.0};
    const auto noise = sampling::build_noise(counts, 0.5);
    std::vector<double> observed(noise.size(), 0.0);
    constexpr int kDraws = 1000000;
    for (int i = 0; i < kDraws; ++i) observed[noise.sample(rng)] += 1.0;
    double stat = 0.0;
    for (std::size_t w = 0; w < noise.size(); ++w) {
      const double expected = kDraws * noise.prob(w);
      stat += (observed[w] - expected) * (observed[w] - expected) / expected;
    }
    const boost::math::chi_squared chi(static_cast<double>(noise.size() - 1));
    const double p_value = boost::math::cdf(boost::math::complement(chi, stat));
    // Reported as 1 - p so that "worst <= tolerance" reads p > 0.001.
    results.push_back(finish("sampler_chi_square", kDraws, 1.0 - p_value, 1.0 - 1e-3));
  }
  {  // Encoder backward passes against central differences.
    encoder::EncoderSpec lstm;
    lstm.kind = encoder::EncoderKind::kLstm;
    lstm.input_dim = 6;
    lstm.hidden_dim = 8;
    for (int layers : {1, 2}) {
      lstm.layers = layers;
      const auto report = encoder::grad_check(lstm, options.seed + static_cast<std::uint64_t>(layers));
      results.push_back(finish("lstm_gradient_l" + std::to_string(layers), 1, report.worst, 1e-4));
    }
    encoder::EncoderSpec window;
    window.input_dim = 6;
    window.hidden_dim = 8;
    window.window_size = 3;
    results.push_back(finish("window_gradient", 1, encoder::grad_check(window, options.seed).worst, 1e-6));
  }
  return results;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  const auto results = run_verification(options);
  bool ok = true;
  std::string report;
  for (const auto& r : results) {
    report += r.to_record() + "\n";
    ok = ok && r.passed;
  }
  report += std::string("summary checks=") + std::to_string(results.size()) +
            " status=" + (ok ? "pass" : "FAIL") + "\n";
  out << report;
  if (!options.report_path.empty()) {
    std::ofstream file(options.report_path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + options.report_path);
    file << report;
    RunConfig cfg;
    cfg.set("command", "verify");
    cfg.set_number("seed", options.seed);
    cfg.set_number("max-size", options.max_size);
    cfg.set_number("instances", options.instances);
    cfg.set("corrupt", options.corrupt_gradient ? "true" : "false");
    cfg.set("report", options.report_path);
    cfg.write_file(options.report_path + ".config");
  }
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace neglm::cli
