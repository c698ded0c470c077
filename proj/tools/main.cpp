// retro: command-line front end for the retrospective reader pipeline.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retro/app/commands.hpp"
#include "retro/errors.hpp"

namespace {

using retro::RunConfig;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

// Flat "key = value" file; '#' starts a comment. Keys are long option names
// without the leading dashes.
std::vector<std::pair<std::string, std::string>> read_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw retro::ConfigError("--config: path not found: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw retro::ConfigError(path + ":" + std::to_string(n) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

double parse_delta(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw retro::ConfigError("--delta: not a number: " + s);
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::string ifv = "ce", matching = "none", module = "intensive", metric = "em", method = "auto";
  std::string delta_text;

  CLI::App app{"Retrospective reader for extractive QA with unanswerable questions"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value file; flags given on the command line win");

  auto paths = [&](CLI::App* s) {
    s->add_option("--data", cfg.data, "SQuAD2.0-format JSON");
    s->add_option("--vocab", cfg.vocab, "vocabulary file, one token per line");
    s->add_option("--out", cfg.out, "output directory");
  };
  auto models = [&](CLI::App* s) {
    s->add_option("--ckpt-sketchy", cfg.ckpt_sketchy, "sketchy module checkpoint");
    s->add_option("--ckpt-intensive", cfg.ckpt_intensive, "intensive module checkpoint");
    s->add_option("--beta1", cfg.rear.beta1, "weight on score_diff");
    s->add_option("--beta2", cfg.rear.beta2, "weight on score_ext");
    s->add_option("--max-len", cfg.features.max_len, "tokens per window");
    s->add_option("--doc-stride", cfg.features.doc_stride, "window advance in passage tokens");
  };

  auto* train = app.add_subcommand("train", "train the sketchy or the intensive module");
  paths(train);
  train->add_option("--module", module, "sketchy | intensive")->check(CLI::IsMember({"sketchy", "intensive"}));
  train->add_option("--ifv", ifv, "I-FV loss: ce | be | mse | none")->check(CLI::IsMember({"ce", "be", "mse", "none"}));
  train->add_option("--matching", matching, "none | ca | ma")->check(CLI::IsMember({"none", "ca", "ma"}));
  train->add_option("--seed", cfg.train.seed);
  train->add_option("--lr", cfg.train.learning_rate);
  train->add_option("--warmup-ratio", cfg.train.warmup_ratio);
  train->add_option("--weight-decay", cfg.train.weight_decay);
  train->add_option("--batch-size", cfg.train.batch_size);
  train->add_option("--epochs", cfg.train.max_epochs, "maximum epochs");
  train->add_option("--alpha1", cfg.train.alpha1, "span loss weight");
  train->add_option("--alpha2", cfg.train.alpha2, "answerability loss weight");
  train->add_option("--hidden", cfg.encoder.hidden_dim);
  train->add_option("--layers", cfg.encoder.num_layers);
  train->add_option("--heads", cfg.encoder.num_heads);
  train->add_option("--ffn", cfg.encoder.ffn_dim);
  train->add_option("--dropout", cfg.encoder.dropout_rate);
  train->add_option("--max-len", cfg.features.max_len);
  train->add_option("--doc-stride", cfg.features.doc_stride);
  train->add_option("--max-answer-len", cfg.max_answer_len);
  train->add_option("--vocab-top-k", cfg.vocab_top_k, "words kept when building a vocabulary");
  train->add_option("--target-em", cfg.target_em, "stop once training-set EM (%) reaches this");
  train->add_option("--eval-every", cfg.eval_every, "epochs between early-stop checks");

  auto* predict = app.add_subcommand("predict", "write predictions.json and null_odds.json");
  paths(predict);
  models(predict);
  predict->add_option("--delta", delta_text, "threshold; null iff v > delta (inf / -inf allowed)");
  predict->add_option("--threshold", cfg.threshold, "threshold.json from tune-threshold");

  auto* tune = app.add_subcommand("tune-threshold", "search delta on a development set");
  paths(tune);
  models(tune);
  tune->add_option("--dev", cfg.dev, "development set");
  tune->add_option("--metric", metric, "em | f1")->check(CLI::IsMember({"em", "f1"}));

  auto* evaluate = app.add_subcommand("evaluate", "EM/F1 with HasAns/NoAns breakdown");
  paths(evaluate);
  evaluate->add_option("--pred", cfg.pred, "predictions.json")->required();
  evaluate->add_option("--delta", delta_text, "threshold to record in the report");
  evaluate->add_option("--threshold", cfg.threshold, "threshold.json to record in the report");

  auto* ablate = app.add_subcommand("ablate", "verification ablation table on a dev set");
  paths(ablate);
  ablate->add_option("--dev", cfg.dev, "development set");
  ablate->add_option("--ckpt-dir", cfg.ckpt_dir,
                     "directory with sketchy.ckpt and intensive_{none,ce,be,mse}.ckpt")->required();
  ablate->add_option("--beta1", cfg.rear.beta1);
  ablate->add_option("--beta2", cfg.rear.beta2);
  ablate->add_option("--metric", metric, "em | f1")->check(CLI::IsMember({"em", "f1"}));
  ablate->add_option("--rows", cfg.rows, "subset of rows")
      ->check(CLI::IsMember(retro::ablation_row_names()))
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ablate->add_option("--max-len", cfg.features.max_len);
  ablate->add_option("--doc-stride", cfg.features.doc_stride);

  auto* signif = app.add_subcommand("significance", "McNemar test on per-question EM");
  paths(signif);
  signif->add_option("--pred-a", cfg.pred_a)->required();
  signif->add_option("--pred-b", cfg.pred_b)->required();
  signif->add_option("--method", method, "auto | exact | chi2")->check(CLI::IsMember({"auto", "exact", "chi2"}));

  auto* synth = app.add_subcommand("synth", "write a synthetic train/dev set and vocabulary");
  synth->add_option("--out", cfg.out, "output directory");
  synth->add_option("--size", cfg.synth.size, "train questions");
  synth->add_option("--dev-size", cfg.synth_dev_size, "dev questions");
  synth->add_option("--unanswerable", cfg.synth.unanswerable_fraction, "fraction of unanswerable questions");
  synth->add_option("--seed", cfg.synth.seed);
  synth->add_option("--vocab-top-k", cfg.vocab_top_k);

  try {
    // Splice config-file entries in right after the subcommand so that the
    // explicit flags that follow take precedence.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      std::size_t erase = 0;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
        erase = 2;
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
        erase = 1;
      }
      if (erase == 0) continue;
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase));
      std::size_t sub_pos = args.size();
      CLI::App* sub = nullptr;
      for (std::size_t k = 0; k < args.size(); ++k) {
        for (auto* s : {train, predict, tune, evaluate, ablate, signif, synth}) {
          if (s->get_name() == args[k]) sub = s;
        }
        if (sub) {
          sub_pos = k;
          break;
        }
      }
      if (!sub) break;
      std::vector<std::string> injected;
      for (const auto& [key, value] : read_flat_config(path)) {
        if (sub->get_option_no_throw("--" + key) == nullptr) {
          std::cerr << "warning: config key '" << key << "' is not an option of " << sub->get_name() << '\n';
          continue;
        }
        injected.push_back("--" + key + "=" + value);
      }
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), injected.begin(), injected.end());
      break;
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  } catch (const retro::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    cfg.train.module = retro::parse_module_kind(module);
    cfg.train.ifv = ifv == "none" ? std::nullopt : std::optional(retro::parse_ifv_variant(ifv));
    cfg.train.matching = retro::parse_matching(matching);
    cfg.metric = retro::parse_tune_metric(metric);
    if (method == "exact") cfg.mcnemar_method = retro::McNemarMethod::exact_binomial;
    if (method == "chi2") cfg.mcnemar_method = retro::McNemarMethod::chi_square_corrected;
    if (!delta_text.empty()) cfg.delta = parse_delta(delta_text);

    if (*train) return retro::cmd_train(cfg);
    if (*predict) return retro::cmd_predict(cfg);
    if (*tune) return retro::cmd_tune_threshold(cfg);
    if (*evaluate) return retro::cmd_evaluate(cfg);
    if (*ablate) return retro::cmd_ablate(cfg);
    if (*signif) return retro::cmd_significance(cfg);
    if (*synth) return retro::cmd_synth(cfg);
  } catch (const retro::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const retro::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
