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

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "neglm/cli/model_file.hpp"
#include "neglm/cli/run_config.hpp"
#include "neglm/corpus.hpp"
#include "neglm/distlab.hpp"
#include "neglm/sampling.hpp"

namespace neglm::cli {
namespace {

std::string record_double(double v) { return format_double(v); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

RunConfig train_config_entries(const TrainLmOptions& o) {
  RunConfig cfg;
  const TrainConfig& c = o.config;
  cfg.set("command", "train-lm");
  cfg.set("train", o.train_path);
  cfg.set("valid", o.valid_path);
  cfg.set("out", o.out);
  cfg.set("mode", std::string(lm::to_string(o.mode)));
  cfg.set("encoder", std::string(encoder::to_string(o.spec.kind)));
  cfg.set_number("input-dim", o.spec.input_dim);
  cfg.set_number("hidden", o.spec.hidden_dim);
  cfg.set_number("layers", o.spec.layers);
  cfg.set_number("window", o.spec.window_size);
  cfg.set_number("dropout", o.spec.dropout);
  cfg.set("optimizer", std::string(to_string(c.optimizer)));
  cfg.set_number("lr", c.lr);
  cfg.set_number("decay", c.decay_factor);
  cfg.set_number("decay-start", c.decay_start_epoch);
  cfg.set_number("epochs", c.epochs);
  cfg.set_number("clip", c.clip_norm);
  cfg.set_number("batch", c.batch_size);
  cfg.set_number("unroll", c.unroll);
  cfg.set_number("k", c.k);
  cfg.set_number("alpha", c.alpha);
  cfg.set_number("seed", c.seed);
  cfg.set_number("log-z", o.log_z);
  cfg.set("vocab-size", o.vocab_size ? std::to_string(*o.vocab_size) : "0");
  cfg.set("min-count", o.min_count ? std::to_string(*o.min_count) : "0");
  cfg.set("reject-positive", c.reject_positive_negatives ? "true" : "false");
  cfg.set("share-negatives", c.share_negatives ? "true" : "false");
  cfg.set("drop-partial", c.drop_partial_window ? "true" : "false");
  return cfg;
}

// Splices `key=value` lines from --config files in front of the explicit
// arguments; explicitly given flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::set<std::string>& flag_names) {
  std::vector<std::string> explicit_args;
  std::vector<std::string> config_paths;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_paths.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_paths.push_back(args[i].substr(9));
    } else {
      explicit_args.push_back(args[i]);
    }
  }
  if (config_paths.empty()) return args;
  std::set<std::string> given;
  for (const std::string& a : explicit_args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  std::vector<std::string> out;
  if (!explicit_args.empty()) out.push_back(explicit_args.front());  // subcommand name
  for (const std::string& path : config_paths) {
    const RunConfig file = RunConfig::read_file(path);
    for (const auto& [key, value] : file.entries()) {
      if (key == "command" || given.count(key) || !flag_names.count(key)) continue;
      out.push_back("--" + key + "=" + value);
      given.insert(key);
    }
  }
  out.insert(out.end(), explicit_args.begin() + (explicit_args.empty() ? 0 : 1),
             explicit_args.end());
  return out;
}

}  // namespace

int cmd_embed_joint(const EmbedJointOptions& o, std::ostream& out, EmbedJointReport* report) {
  const distlab::JointDistribution dist = distlab::read_joint_tsv_file(o.dist_path);
  const distlab::ScoreConfig cfg(o.k);
  if (!o.no_optimum && !dist.full_support())
    throw std::domain_error(
        "the distribution has empty cells, so S(pmi) is undefined; pass --no-optimum");

  JointEmbedding embedding;
  embedding.k = o.k;
  embedding.seed = o.seed;
  embedding.x_labels = dist.x_labels;
  embedding.y_labels = dist.y_labels;
  embedding.metadata["rng"] = std::string(Rng::kAlgorithm);
  embedding.metadata["method"] = o.method;

  RunConfig rc;
  rc.set("command", "embed-joint");
  rc.set("dist", o.dist_path);
  rc.set("out", o.out);
  rc.set_number("d", o.d);
  rc.set_number("k", o.k);
  rc.set("mode", o.method);
  rc.set_number("seed", o.seed);

  if (o.method == "exact") {
    distlab::ExactTrainOptions opts;
    opts.d = o.d;
    opts.steps = o.steps;
    opts.lr = o.lr.value_or(50.0);
    opts.seed = o.seed;
    rc.set_number("lr", opts.lr);
    rc.set_number("steps", opts.steps);
    embedding.factors = distlab::train_exact(dist, cfg, opts).factors;
  } else if (o.method == "sampled") {
    Rng rng = Rng(o.seed).split(3);
    const auto pairs = distlab::sample_pairs(dist, o.pairs, rng);
    std::vector<double> y_counts(static_cast<std::size_t>(dist.n_y()), 0.0);
    for (const auto& p : pairs) y_counts[static_cast<std::size_t>(p.y)] += 1.0;
    const auto noise = sampling::build_noise(y_counts, o.alpha);
    TrainConfig tc;
    tc.lr = o.lr.value_or(0.01);
    tc.epochs = o.epochs;
    tc.seed = o.seed;
    tc.k = o.k;
    rc.set_number("lr", tc.lr);
    rc.set_number("pairs", o.pairs);
    rc.set_number("epochs", o.epochs);
    rc.set_number("alpha", o.alpha);
    embedding.factors = distlab::train_sampled(pairs, cfg, noise, o.d, tc);
  } else {
    throw std::invalid_argument("--mode must be exact or sampled");
  }
  rc.set("no-optimum", o.no_optimum ? "true" : "false");
  embedding.config_hash = rc.hash();

  const distlab::Matrix m = embedding.factors.product();
  if (!m.allFinite()) throw distlab::DivergedError("trained embedding is not finite");
  EmbedJointReport r;
  r.score = distlab::score(dist, cfg, m);
  r.kl_gap = distlab::kl_gap(dist, cfg, m);
  if (!o.no_optimum) r.optimal_score = distlab::optimal_score(dist, cfg);

  if (!o.out.empty()) {
    save_joint(o.out, embedding);
    rc.write_file(o.out + ".config");
  }
  out << "s_m=" << record_double(r.score);
  if (r.optimal_score) out << " s_pmi=" << record_double(*r.optimal_score);
  out << " kl_gap=" << record_double(r.kl_gap) << " d=" << o.d << " k=" << o.k << "\n";
  if (report) *report = r;
  return kExitOk;
}

int cmd_train_lm(const TrainLmOptions& o, std::ostream& out) {
  const std::string train_text = corpus::read_text_file(o.train_path);
  const std::string valid_text =
      o.valid_path.empty() ? std::string() : corpus::read_text_file(o.valid_path);
  const corpus::Vocabulary vocab = corpus::build_vocab(train_text, {o.vocab_size, o.min_count});
  const auto train_ids = corpus::encode_stream(train_text, vocab);
  const auto valid_ids = corpus::encode_stream(valid_text, vocab);

  const RunConfig rc = train_config_entries(o);
  if (!o.out.empty()) {
    rc.write_file(o.out + ".config");
    std::ofstream vocab_out(o.out + ".vocab", std::ios::trunc);
    vocab.write(vocab_out);
  }
  out << "vocab_size=" << vocab.size() << " train_tokens=" << train_ids.size()
      << " valid_tokens=" << valid_ids.size() << "\n";

  std::string metrics;
  auto on_epoch = [&](const lm::EpochMetrics& m) {
    metrics += m.to_record(false) + "\n";
    out << m.to_record(true) << std::endl;
  };
  auto finalize = [&](lm::LanguageModel model) {
    model.config_hash = rc.hash();
    if (!o.out.empty()) {
      save_model(o.out, model);
      write_text(o.out + ".metrics", metrics);
    }
  };

  TrainConfig config = o.config;
  config.log_z = o.log_z;
  lm::TrainResult result;
  try {
    result = lm::train(vocab, train_ids, valid_ids, config, o.mode, o.spec, on_epoch);
  } catch (const lm::TrainingAborted& e) {
    finalize(e.last_good());
    out << "aborted=" << e.what() << "\n";
    return kExitNumerical;
  }
  finalize(result.model);
  out << "best_epoch=" << result.best_epoch << "\n";
  return kExitOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& out, lm::Evaluation* result) {
  const lm::LanguageModel model = load_model(o.model_path);
  const std::string text = corpus::read_text_file(o.test_path);
  const auto ids = corpus::encode_stream(text, model.vocab);
  const lm::Evaluation eval = lm::evaluate(model, ids, o.mode_override);
  out << "perplexity=" << record_double(eval.perplexity)
      << " mean_log_loss=" << record_double(eval.mean_log_loss) << " tokens=" << eval.tokens
      << " mode=" << lm::to_string(o.mode_override.value_or(model.mode)) << "\n";
  if (result) *result = eval;
  return std::isfinite(eval.perplexity) ? kExitOk : kExitNumerical;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Negative-sampling embeddings and language models"};
  app.require_subcommand(1);

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run the numerical property checks");
  verify_cmd->add_option("--seed", verify.seed);
  verify_cmd->add_option("--max-size", verify.max_size, "Largest alphabet size")
      ->check(CLI::Range(1, 64));
  verify_cmd->add_option("--instances", verify.instances)->check(CLI::PositiveNumber);
  verify_cmd->add_flag("--corrupt", verify.corrupt_gradient,
                       "Negate one gradient component (harness self-test)");
  verify_cmd->add_option("--report", verify.report_path, "Also write the report here");

  EmbedJointOptions embed;
  double embed_lr = 0.0;
  auto* embed_cmd = app.add_subcommand("embed-joint", "Embed a joint distribution from a TSV file");
  embed_cmd->add_option("--dist", embed.dist_path, "TSV with header x<TAB>y<TAB>p")->required();
  embed_cmd->add_option("--out", embed.out, "Model file to write");
  embed_cmd->add_option("--d", embed.d)->check(CLI::PositiveNumber);
  embed_cmd->add_option("--k", embed.k)->check(CLI::PositiveNumber);
  embed_cmd->add_option("--mode", embed.method)->check(CLI::IsMember({"exact", "sampled"}));
  embed_cmd->add_option("--seed", embed.seed);
  auto* embed_lr_opt = embed_cmd->add_option("--lr", embed_lr)->check(CLI::PositiveNumber);
  embed_cmd->add_option("--steps", embed.steps)->check(CLI::PositiveNumber);
  embed_cmd->add_option("--pairs", embed.pairs)->check(CLI::PositiveNumber);
  embed_cmd->add_option("--epochs", embed.epochs)->check(CLI::PositiveNumber);
  embed_cmd->add_option("--alpha", embed.alpha)->check(CLI::Range(0.0, 1.0));
  embed_cmd->add_flag("--no-optimum", embed.no_optimum);

  TrainLmOptions train;
  std::string train_mode = "neglm", encoder_kind = "window", optimizer = "sgd";
  Eigen::Index input_dim = 0;
  std::size_t vocab_size = 0;
  std::uint64_t min_count = 0;
  auto* train_cmd = app.add_subcommand("train-lm", "Train a language model");
  train_cmd->add_option("--train", train.train_path)->required();
  train_cmd->add_option("--valid", train.valid_path);
  train_cmd->add_option("--out", train.out);
  train_cmd->add_option("--mode", train_mode)
      ->check(CLI::IsMember({"nce", "neg", "neglm", "neglm-b"}));
  train_cmd->add_option("--encoder", encoder_kind)->check(CLI::IsMember({"window", "lstm"}));
  train_cmd->add_option("--input-dim", input_dim, "Input embedding width (default: --hidden)");
  train_cmd->add_option("--hidden", train.spec.hidden_dim)->check(CLI::PositiveNumber);
  train_cmd->add_option("--d", train.spec.hidden_dim, "Alias of --hidden");
  train_cmd->add_option("--layers", train.spec.layers)->check(CLI::PositiveNumber);
  train_cmd->add_option("--window", train.spec.window_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--dropout", train.spec.dropout)->check(CLI::Range(0.0, 0.999));
  train_cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"sgd", "adam"}));
  train_cmd->add_option("--lr", train.config.lr);
  train_cmd->add_option("--decay", train.config.decay_factor);
  train_cmd->add_option("--decay-start", train.config.decay_start_epoch);
  train_cmd->add_option("--epochs", train.config.epochs);
  train_cmd->add_option("--clip", train.config.clip_norm);
  train_cmd->add_option("--batch", train.config.batch_size);
  train_cmd->add_option("--unroll", train.config.unroll);
  train_cmd->add_option("--k", train.config.k);
  train_cmd->add_option("--alpha", train.config.alpha);
  train_cmd->add_option("--seed", train.config.seed);
  train_cmd->add_option("--log-z", train.log_z, "Constant NCE log normalizer");
  train_cmd->add_option("--vocab-size", vocab_size, "Keep the N most frequent words (0: all)");
  train_cmd->add_option("--min-count", min_count, "Drop words seen fewer times (0: keep)");
  train_cmd->add_flag("--reject-positive", train.config.reject_positive_negatives);
  train_cmd->add_flag("--share-negatives", train.config.share_negatives);
  train_cmd->add_flag("--drop-partial", train.config.drop_partial_window);

  EvalOptions eval;
  std::string mode_override;
  auto* eval_cmd = app.add_subcommand("eval", "Perplexity of a saved model on a text file");
  eval_cmd->add_option("--model", eval.model_path)->required();
  eval_cmd->add_option("--test", eval.test_path)->required();
  eval_cmd->add_option("--mode-override", mode_override, "Evaluate with another mode's test rule")
      ->check(CLI::IsMember({"nce", "neg", "neglm", "neglm-b"}));

  std::vector<std::string> args(argv + 1, argv + argc);
  std::set<std::string> flag_names;
  for (const CLI::App* sub : {verify_cmd, embed_cmd, train_cmd, eval_cmd})
    for (const CLI::Option* opt : sub->get_options())
      for (const std::string& name : opt->get_lnames()) flag_names.insert(name);

  try {
    args = expand_config(args, flag_names);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*verify_cmd) return cmd_verify(verify, out);
    if (*embed_cmd) {
      if (*embed_lr_opt) embed.lr = embed_lr;
      return cmd_embed_joint(embed, out);
    }
    if (*train_cmd) {
      train.mode = lm::parse_mode(train_mode);
      train.spec.kind = encoder::parse_encoder_kind(encoder_kind);
      train.spec.input_dim = input_dim > 0 ? input_dim : train.spec.hidden_dim;
      train.config.optimizer = parse_optimizer(optimizer);
      if (vocab_size > 0) train.vocab_size = vocab_size;
      if (min_count > 0) train.min_count = min_count;
      train.config.validate();
      train.spec.validate();
      return cmd_train_lm(train, out);
    }
    if (*eval_cmd) {
      if (!mode_override.empty()) eval.mode_override = lm::parse_mode(mode_override);
      return cmd_eval(eval, out);
    }
  } catch (const distlab::DivergedError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace neglm::cli
