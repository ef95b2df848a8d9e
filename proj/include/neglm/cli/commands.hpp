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

// Subcommands of the neglm tool. Each cmd_* function returns a process exit
// code and writes human-readable key=value records to `out`.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "neglm/encoder.hpp"
#include "neglm/lm.hpp"
#include "neglm/train_config.hpp"

namespace neglm::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int max_size = 10;
  int instances = 200;
  /// Negates one analytic gradient component to prove the harness can fail.
  bool corrupt_gradient = false;
  std::string report_path;
};

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed = false;

  std::string to_record() const;
};

std::vector<CheckResult> run_verification(const VerifyOptions& options);
int cmd_verify(const VerifyOptions& options, std::ostream& out);

struct EmbedJointOptions {
  std::string dist_path;
  std::string out;
  Eigen::Index d = 2;
  int k = 1;
  std::string method = "exact";  // exact | sampled
  std::uint64_t seed = 1;
  std::optional<double> lr;      // 50 for exact, 0.01 for sampled
  int steps = 10000;             // exact
  std::size_t pairs = 2000000;   // sampled
  int epochs = 1;                // sampled
  double alpha = 1.0;            // sampled: smoothing of the empirical p(y)
  /// Report S(m) and kl_gap only; required for distributions without full
  /// support, where S(pmi) is undefined.
  bool no_optimum = false;
};

struct EmbedJointReport {
  double score = 0.0;
  std::optional<double> optimal_score;
  double kl_gap = 0.0;
};

int cmd_embed_joint(const EmbedJointOptions& options, std::ostream& out,
                    EmbedJointReport* report = nullptr);

struct TrainLmOptions {
  std::string train_path;
  std::string valid_path;
  std::string out;
  TrainConfig config;
  lm::Mode mode = lm::Mode::kNeglm;
  encoder::EncoderSpec spec;
  std::optional<std::size_t> vocab_size;
  std::optional<std::uint64_t> min_count;
  double log_z = 0.0;
};

int cmd_train_lm(const TrainLmOptions& options, std::ostream& out);

struct EvalOptions {
  std::string model_path;
  std::string test_path;
  std::optional<lm::Mode> mode_override;
};

int cmd_eval(const EvalOptions& options, std::ostream& out,
             lm::Evaluation* result = nullptr);

/// Parses argv and dispatches. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace neglm::cli
