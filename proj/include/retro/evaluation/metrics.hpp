#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retro/datapipe/squad.hpp"

namespace retro {

// qid -> answer text ("" for a null prediction). This is the
// predictions.json layout read by the SQuAD2.0 evaluator.
using Predictions = std::map<std::string, std::string>;

Predictions load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const Predictions& predictions);

// Lowercase, drop ASCII punctuation, drop the articles a/an/the as whole
// words, collapse whitespace. Mirrors the reference SQuAD scorer.
std::string normalize_answer(std::string_view text);
std::vector<std::string> answer_tokens(std::string_view text);

// Gold texts as the reference scorer sees them: answers whose normalised
// form is empty are dropped and an unanswerable question has the single
// gold answer "".
std::vector<std::string> scoring_golds(const SquadExample& example);

int em_score(std::string_view prediction, std::span<const std::string> gold_answers,
             bool is_impossible);
double f1_score(std::string_view prediction, std::span<const std::string> gold_answers,
                bool is_impossible);

struct QuestionScore {
  std::string qid;
  bool has_answer = false;
  int exact = 0;
  double f1 = 0.0;
};

// Scores in dataset order; a missing prediction is an EvaluationError.
std::vector<QuestionScore> score_questions(const Predictions& predictions,
                                           std::span<const SquadExample> dataset);

struct SplitMetrics {
  double exact = 0.0;  // percent
  double f1 = 0.0;     // percent
  std::size_t total = 0;
};

struct EvalReport {
  SplitMetrics overall;
  SplitMetrics has_ans;
  SplitMetrics no_ans;
  std::optional<double> delta;
  std::vector<std::string> warnings;  // e.g. predictions for unknown qids
};

EvalReport evaluate(const Predictions& predictions, std::span<const SquadExample> dataset);
nlohmann::json to_json(const EvalReport& report);

// "Predicted null" is the positive class. Values are fractions in [0,1].
struct UnanswerableMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  bool degenerate_precision = false;  // no null predictions at all
  bool degenerate_recall = false;     // no unanswerable questions at all
};

UnanswerableMetrics unanswerable_detection_metrics(const Predictions& predictions,
                                                   std::span<const SquadExample> dataset);
nlohmann::json to_json(const UnanswerableMetrics& m);

struct ReportRow {
  std::string name;
  std::optional<EvalReport> report;  // nullopt renders as an absent row
};

// All / HasAns / NoAns x EM / F1, one line per row.
std::string render_verification_table(std::span<const ReportRow> rows);
std::string render_unanswerable_table(
    std::span<const std::pair<std::string, UnanswerableMetrics>> rows);

}  // namespace retro
