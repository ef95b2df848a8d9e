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

#include "neglm/cli/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "bigram_chain.hpp"
#include "neglm/cli/model_file.hpp"
#include "neglm/cli/run_config.hpp"

namespace neglm::cli {
namespace {

namespace fs = std::filesystem;

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "neglm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("neglm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }

  void write_corpus() const {
    Rng rng(3);
    const auto chain = testing::make_chain(15, 2, rng);
    int state = 0;
    write("train.txt", chain.generate(8000, state, rng));
    write("valid.txt", chain.generate(1000, state, rng));
    write("test.txt", chain.generate(1000, state, rng));
  }

  std::vector<std::string> train_args(const std::string& out) const {
    return {"train-lm", "--train", path("train.txt"), "--valid", path("valid.txt"), "--out", path(out),
            "--epochs", "3", "--hidden", "12", "--k", "5", "--batch", "4", "--unroll", "10", "--lr", "2"};
  }

  fs::path dir_;
};

TEST_F(CliTest, VerifyPassesQuickly) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = invoke({"verify", "--report", path("report.txt")});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_LT(seconds, 60.0);
  EXPECT_NE(r.out.find("check=score_gap_identity"), std::string::npos);
  EXPECT_NE(r.out.find("summary checks="), std::string::npos);
  EXPECT_EQ(slurp(path("report.txt")), r.out);
  EXPECT_TRUE(fs::exists(path("report.txt.config")));
}

TEST_F(CliTest, VerifyCorruptionFails) {
  const auto r = invoke({"verify", "--instances", "20", "--corrupt"});
  EXPECT_EQ(r.code, kExitCheckFailed);
  EXPECT_NE(r.out.find("check=exact_gradient instances=1 worst="), std::string::npos);
  EXPECT_NE(r.out.find("status=FAIL"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(invoke({"train-lm"}).code, kExitUsage);
  EXPECT_EQ(invoke({"train-lm", "--train", "x", "--mode", "softmax"}).code, kExitUsage);
  EXPECT_EQ(invoke({"embed-joint", "--dist", "x", "--d", "abc"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
}

TEST_F(CliTest, EmbedJointExactRecovers) {
  Rng rng(5);
  std::ostringstream tsv;
  tsv << "x\ty\tp\n";
  Eigen::MatrixXd w(5, 5);
  for (Eigen::Index i = 0; i < 25; ++i) w(i) = 0.2 + rng.uniform();
  w /= w.sum();
  tsv.precision(17);
  for (int x = 0; x < 5; ++x)
    for (int y = 0; y < 5; ++y) tsv << "x" << x << "\ty" << y << "\t" << w(x, y) << "\n";
  write("d.tsv", tsv.str());
  EmbedJointOptions o;
  o.dist_path = path("d.tsv");
  o.out = path("e.bin");
  o.d = 5;
  o.k = 2;
  std::ostringstream out;
  EmbedJointReport report;
  ASSERT_EQ(cmd_embed_joint(o, out, &report), kExitOk);
  EXPECT_LE(report.kl_gap, 1e-6);
  ASSERT_TRUE(report.optimal_score.has_value());
  EXPECT_NEAR(*report.optimal_score - report.score, report.kl_gap, 1e-10);
  const auto e = load_joint(o.out);
  EXPECT_EQ(e.x_labels[4], "x4");
  EXPECT_EQ(e.factors.d(), 5);
  EXPECT_EQ(RunConfig::read_file(o.out + ".config").get("command"), "embed-joint");

  double prev = 1e300;
  for (int d = 1; d <= 5; ++d) {
    o.d = d;
    o.out.clear();
    ASSERT_EQ(cmd_embed_joint(o, out, &report), kExitOk);
    EXPECT_LE(report.kl_gap, prev + 1e-9) << d;
    prev = report.kl_gap;
  }
}

TEST_F(CliTest, EmbedJointSampledAndErrors) {
  write("d.tsv", "x\ty\tp\na\tu\t0.3\na\tv\t0.2\nb\tu\t0.1\nb\tv\t0.4\n");
  auto r = invoke({"embed-joint", "--dist", path("d.tsv"), "--mode", "sampled", "--pairs", "200000",
                   "--d", "2", "--out", path("s.bin")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("kl_gap="), std::string::npos);

  write("sparse.tsv", "x\ty\tp\na\tu\t0.5\nb\tv\t0.5\n");
  r = invoke({"embed-joint", "--dist", path("sparse.tsv")});
  EXPECT_EQ(r.code, kExitCheckFailed);
  r = invoke({"embed-joint", "--dist", path("sparse.tsv"), "--no-optimum"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.find("s_pmi="), std::string::npos);

  write("bad.tsv", "x\ty\tp\na\tu\t0.5\n");
  EXPECT_EQ(invoke({"embed-joint", "--dist", path("bad.tsv")}).code, kExitCheckFailed);
  EXPECT_EQ(invoke({"embed-joint", "--dist", path("missing.tsv")}).code, kExitCheckFailed);
}

TEST_F(CliTest, TrainEvalAndReproduce) {
  write_corpus();
  auto r = invoke(train_args("m.bin"));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* suffix : {"", ".config", ".metrics", ".vocab"})
    EXPECT_TRUE(fs::exists(path(std::string("m.bin") + suffix))) << suffix;
  const auto cfg = RunConfig::read_file(path("m.bin.config"));
  EXPECT_EQ(cfg.get("alpha"), "0.75");
  EXPECT_EQ(cfg.get("mode"), "neglm");
  EXPECT_EQ(cfg.get("epochs"), "3");
  const auto metrics = slurp(path("m.bin.metrics"));
  EXPECT_NE(metrics.find("epoch=3 train_loss="), std::string::npos);
  EXPECT_NE(r.out.find("wall_time="), std::string::npos);

  // Same seed and config: identical metrics and model bytes.
  ASSERT_EQ(invoke(train_args("m2.bin")).code, kExitOk);
  EXPECT_EQ(slurp(path("m2.bin.metrics")), metrics);
  EXPECT_EQ(slurp(path("m2.bin")), slurp(path("m.bin")));

  // Replaying the resolved config reproduces the run.
  ASSERT_EQ(invoke({"train-lm", "--config", path("m.bin.config"), "--out", path("m3.bin")}).code, kExitOk);
  EXPECT_EQ(slurp(path("m3.bin")), slurp(path("m.bin")));

  EvalOptions eo{path("m.bin"), path("test.txt"), std::nullopt};
  std::ostringstream out;
  lm::Evaluation loaded, neg;
  ASSERT_EQ(cmd_eval(eo, out, &loaded), kExitOk);
  const auto model = load_model(path("m.bin"));
  const auto ids = corpus::encode_stream(corpus::read_text_file(path("test.txt")), model.vocab);
  EXPECT_EQ(loaded.perplexity, lm::perplexity(model, ids));
  eo.mode_override = lm::Mode::kNeg;
  ASSERT_EQ(cmd_eval(eo, out, &neg), kExitOk);
  EXPECT_GT(neg.perplexity, loaded.perplexity);

  r = invoke({"eval", "--model", path("m.bin"), "--test", path("test.txt")});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("perplexity="), std::string::npos);
  EXPECT_NE(r.out.find("mean_log_loss="), std::string::npos);
}

TEST_F(CliTest, EvalUniformModel) {
  auto vocab = corpus::build_vocab("a b c d e f g h\n");
  auto m = lm::make_model(vocab, lm::Mode::kNeg, encoder::EncoderSpec{}, 3, 0.75, 1);
  m.word_table().setZero();
  save_model(path("u.bin"), m);
  write("t.txt", "h g f e\nd c b a\nzzz a\n");
  EvalOptions eo{path("u.bin"), path("t.txt"), std::nullopt};
  std::ostringstream out;
  lm::Evaluation e;
  ASSERT_EQ(cmd_eval(eo, out, &e), kExitOk);
  EXPECT_NEAR(e.perplexity, static_cast<double>(vocab.size()), 1e-9);
}

TEST_F(CliTest, CorruptModelIsRejected) {
  auto vocab = corpus::build_vocab("a b\n");
  save_model(path("m.bin"), lm::make_model(vocab, lm::Mode::kNeg, encoder::EncoderSpec{}, 1, 0.75, 1));
  std::string bytes = slurp(path("m.bin"));
  bytes[bytes.size() / 2] ^= 1;
  write("m.bin", bytes);
  write("t.txt", "a b\n");
  EXPECT_EQ(invoke({"eval", "--model", path("m.bin"), "--test", path("t.txt")}).code, kExitCheckFailed);
}

TEST_F(CliTest, NumericalAbortExitsThreeWithCheckpoint) {
  write_corpus();
  auto args = train_args("x.bin");
  args[args.size() - 1] = "1e300";
  const auto r = invoke(args);
  EXPECT_EQ(r.code, kExitNumerical) << r.out << r.err;
  ASSERT_TRUE(fs::exists(path("x.bin")));
  EXPECT_TRUE(load_model(path("x.bin")).embeddings.all_finite());
}

TEST(RunConfig, RoundTripAndHash) {
  RunConfig c;
  c.set("mode", "neg");
  c.set_number("lr", 0.1);
  c.set("out", "a.bin");
  std::istringstream in("# comment\n\n" + c.to_string());
  const auto back = RunConfig::read(in);
  EXPECT_EQ(back.get("lr"), "0.1");
  EXPECT_EQ(back.hash(), c.hash());
  RunConfig moved = c;
  moved.set("out", "b.bin");
  EXPECT_EQ(moved.hash(), c.hash());
  moved.set("lr", "0.2");
  EXPECT_NE(moved.hash(), c.hash());
  std::istringstream bad("novalue\n");
  EXPECT_THROW(RunConfig::read(bad), std::runtime_error);
}

}  // namespace
}  // namespace neglm::cli
