#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "retro/app/pipeline.hpp"
#include "retro/datapipe/synthetic.hpp"
#include "retro/evaluation/mcnemar.hpp"
#include "retro/trainer/trainer.hpp"

namespace retro {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path data;
  fs::path dev;
  fs::path vocab;
  fs::path ckpt_sketchy;
  fs::path ckpt_intensive;
  fs::path ckpt_dir;   // ablate: holds sketchy.ckpt and intensive_{none,ce,be,mse}.ckpt
  fs::path threshold;  // threshold.json written by tune-threshold
  fs::path pred;
  fs::path pred_a;
  fs::path pred_b;
  fs::path out = ".";

  TrainConfig train;
  EncoderConfig encoder;
  FeatureOptions features;
  std::size_t max_answer_len = 30;
  std::size_t vocab_top_k = 150;
  RearWeights rear;
  std::optional<double> delta;
  TuneMetric metric = TuneMetric::exact_match;
  // Early stopping for train: stop once the training-set EM (percent, with
  // a threshold tuned on the same set) reaches this value. 0 disables.
  double target_em = 0.0;
  std::size_t eval_every = 5;
  std::vector<std::string> rows;  // ablate: subset of ablation_row_names()
  std::optional<McNemarMethod> mcnemar_method;
  SyntheticOptions synth;
  std::size_t synth_dev_size = 32;
};

// Name of the checkpoint cmd_train writes for `config`, e.g. intensive_ce.ckpt.
std::string checkpoint_filename(const TrainConfig& config);

int cmd_train(const RunConfig& config, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int cmd_predict(const RunConfig& config, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int cmd_tune_threshold(const RunConfig& config, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr);
int cmd_evaluate(const RunConfig& config, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int cmd_ablate(const RunConfig& config, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int cmd_significance(const RunConfig& config, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr);
// Writes train.json, dev.json and vocab.txt for the synthetic corpus.
int cmd_synth(const RunConfig& config, std::ostream& out = std::cout, std::ostream& err = std::cerr);

// ---- ablation ----------------------------------------------------------------

const std::vector<std::string>& ablation_row_names();

struct AblationRow {
  std::string name;
  std::optional<EvalReport> report;  // nullopt: a checkpoint was missing
  std::string missing;               // which checkpoint, when absent
  RearWeights weights;
  std::optional<Threshold> threshold;
  fs::path dir;                      // predictions.json, null_odds.json, verdicts.jsonl, eval.json
};

std::vector<AblationRow> run_ablation(const RunConfig& config, std::ostream& err = std::cerr);

// ---- significance ------------------------------------------------------------

struct SignificanceReport {
  McNemarResult result;
  std::size_t questions = 0;
  double em_a = 0.0;
  double em_b = 0.0;
};

SignificanceReport compare_predictions(const Predictions& a, const Predictions& b,
                                       std::span<const SquadExample> dataset,
                                       std::optional<McNemarMethod> method = std::nullopt);
std::string render_significance(const SignificanceReport& report);

}  // namespace retro
