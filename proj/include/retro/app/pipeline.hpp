#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "retro/datapipe/features.hpp"
#include "retro/decision/decision.hpp"
#include "retro/evaluation/metrics.hpp"
#include "retro/readers/intensive.hpp"
#include "retro/readers/sketchy.hpp"
#include "retro/readers/tav.hpp"

namespace retro {

// One question's fused verdict plus the n-best list of its chosen window.
struct QuestionVerdict {
  VerdictScores scores;
  std::vector<SpanCandidate> n_best;
  bool gold_unanswerable = false;
};

// Either model may be absent; its score term is then 0 (no span without
// an intensive model, so the answer text is empty).
struct VerificationInputs {
  const SketchyModel* sketchy = nullptr;
  const IntensiveModel* intensive = nullptr;
  RearWeights weights;
  FeatureOptions features;
  std::size_t n_best = 20;
};

// encode -> heads -> TAV / score_ext per window -> aggregate -> v.
// Returns one verdict per example, in dataset order.
std::vector<QuestionVerdict> verify_questions(std::span<const SquadExample> examples,
                                              std::span<const Feature> features,
                                              const VerificationInputs& inputs);

Predictions decide_all(std::span<const QuestionVerdict> verdicts, double delta);
std::map<std::string, double> null_odds(std::span<const QuestionVerdict> verdicts);

// Per-question metric (EM or F1) when answered with the best span and when
// predicting null, for threshold search.
std::vector<ThresholdSample> threshold_samples(std::span<const QuestionVerdict> verdicts,
                                               std::span<const SquadExample> examples,
                                               TuneMetric metric);

// One JSON object per question: scores, span, answer text, n-best.
void write_verdicts_jsonl(const std::filesystem::path& path, std::span<const QuestionVerdict> verdicts);
std::vector<VerdictScores> read_verdicts_jsonl(const std::filesystem::path& path);

// Thresholds may be infinite; JSON stores those as "inf" / "-inf".
nlohmann::json delta_to_json(double delta);
double delta_from_json(const nlohmann::json& j);
void save_threshold(const std::filesystem::path& path, const Threshold& t);
Threshold load_threshold(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace retro
