#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retro/datapipe/features.hpp"

namespace retro {

struct RearWeights {
  double beta1 = 0.5;  // weight on score_diff
  double beta2 = 0.5;  // weight on score_ext

  void validate() const;
};

// Per-question (or per-window) decision inputs and outcome.
struct VerdictScores {
  std::string qid;
  double score_has = 0.0;
  double score_null = 0.0;
  double score_diff = 0.0;
  double score_ext = 0.0;
  double v = 0.0;  // beta1 * score_diff + beta2 * score_ext
  std::size_t window_index = 0;
  SpanLabel best_span;
  std::string answer_text;
};

// v = beta1 * score_diff + beta2 * score_ext
double rear_verify(double score_diff, double score_ext, const RearWeights& weights);

// v is a no-answer score: the prediction is null (empty) iff v > delta.
std::string decide(double v, double delta, std::string_view best_span_text);

// Merges the windows of one question: span from the window with the
// highest score_has (first on ties), score_diff = that window's score_null
// minus that score_has, score_ext averaged over windows, v recomputed.
VerdictScores aggregate_windows(std::span<const VerdictScores> windows, const RearWeights& weights);

enum class TuneMetric { exact_match, f1 };
std::string to_string(TuneMetric m);
TuneMetric parse_tune_metric(std::string_view text);

// What each question would score if answered with its best span, and if
// predicted null.
struct ThresholdSample {
  double v = 0.0;
  double answered_score = 0.0;
  double null_score = 0.0;
};

struct Threshold {
  double delta = 0.0;  // may be +/-infinity
  TuneMetric tuned_metric = TuneMetric::exact_match;
  std::string tuned_on;
  double metric_value = 0.0;  // mean per-question score at delta, in [0,1]
};

// Mean per-question score when predicting null iff v > delta.
double metric_at(std::span<const ThresholdSample> samples, double delta);

// Candidate deltas: -inf, midpoints of consecutive distinct sorted v, +inf.
std::vector<double> threshold_candidates(std::span<const ThresholdSample> samples);

// Best delta over the candidates; ties go to the smaller delta.
Threshold search_threshold(std::span<const ThresholdSample> samples, TuneMetric metric,
                           std::string tuned_on = {});

// Passage substring covering tokens start..end of `feature`.
std::string extract_answer_text(const SpanLabel& span, const Feature& feature,
                                const std::string& passage);

}  // namespace retro
