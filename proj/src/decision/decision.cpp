#include "retro/decision/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "retro/errors.hpp"

namespace retro {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void RearWeights::validate() const {
  if (beta1 < 0.0 || beta2 < 0.0) {
    throw ConfigError("rear verification: weights must be non-negative (beta1=" +
                      std::to_string(beta1) + ", beta2=" + std::to_string(beta2) + ")");
  }
}

double rear_verify(double score_diff, double score_ext, const RearWeights& weights) {
  weights.validate();
  return weights.beta1 * score_diff + weights.beta2 * score_ext;
}

std::string decide(double v, double delta, std::string_view best_span_text) {
  return v > delta ? std::string() : std::string(best_span_text);
}

VerdictScores aggregate_windows(std::span<const VerdictScores> windows, const RearWeights& weights) {
  if (windows.empty()) throw AggregationError("aggregate_windows: no windows");
  std::size_t best = 0;
  double ext_sum = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].qid != windows[0].qid) {
      throw AggregationError("aggregate_windows: mixed qids " + windows[0].qid + " and " + windows[i].qid);
    }
    if (windows[i].score_has > windows[best].score_has) best = i;
    ext_sum += windows[i].score_ext;
  }
  VerdictScores out = windows[best];
  out.score_diff = out.score_null - out.score_has;
  out.score_ext = windows.size() == 1 ? windows[0].score_ext : ext_sum / static_cast<double>(windows.size());
  out.v = rear_verify(out.score_diff, out.score_ext, weights);
  return out;
}

std::string to_string(TuneMetric m) { return m == TuneMetric::exact_match ? "EM" : "F1"; }

TuneMetric parse_tune_metric(std::string_view text) {
  if (text == "EM" || text == "em") return TuneMetric::exact_match;
  if (text == "F1" || text == "f1") return TuneMetric::f1;
  throw ConfigError("unknown tuning metric '" + std::string(text) + "' (expected em or f1)");
}

double metric_at(std::span<const ThresholdSample> samples, double delta) {
  double total = 0.0;
  for (const auto& s : samples) total += s.v > delta ? s.null_score : s.answered_score;
  return total / static_cast<double>(samples.size());
}

std::vector<double> threshold_candidates(std::span<const ThresholdSample> samples) {
  std::vector<double> vs;
  vs.reserve(samples.size());
  for (const auto& s : samples) vs.push_back(s.v);
  std::sort(vs.begin(), vs.end());
  vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
  std::vector<double> out{-kInf};
  for (std::size_t i = 1; i < vs.size(); ++i) {
    const double mid = vs[i - 1] + (vs[i] - vs[i - 1]) / 2.0;
    // adjacent doubles can round the midpoint up onto vs[i]
    out.push_back(mid < vs[i] ? mid : vs[i - 1]);
  }
  out.push_back(kInf);
  return out;
}

Threshold search_threshold(std::span<const ThresholdSample> samples, TuneMetric metric,
                           std::string tuned_on) {
  if (samples.empty()) throw SearchError("search_threshold: empty development set");
  for (const auto& s : samples) {
    if (!std::isfinite(s.v)) throw SearchError("search_threshold: non-finite verification score");
  }
  Threshold best{-kInf, metric, std::move(tuned_on), -1.0};
  // Candidates ascend, so keeping only strict improvements favours the
  // smaller delta on ties.
  for (double delta : threshold_candidates(samples)) {
    const double value = metric_at(samples, delta);
    if (value > best.metric_value) {
      best.delta = delta;
      best.metric_value = value;
    }
  }
  return best;
}

std::string extract_answer_text(const SpanLabel& span, const Feature& feature,
                                const std::string& passage) {
  if (span.start > span.end || !feature.is_passage_position(span.start) ||
      !feature.is_passage_position(span.end)) {
    throw ExtractionError("extract_answer_text: span (" + std::to_string(span.start) + "," +
                          std::to_string(span.end) + ") outside the passage (qid " + feature.qid + ")");
  }
  const CharSpan first = feature.offset_map[span.start];
  const CharSpan last = feature.offset_map[span.end];
  if (!first.valid() || !last.valid() || last.end > passage.size() || first.begin > last.end) {
    throw ExtractionError("extract_answer_text: unmapped offsets (qid " + feature.qid + ")");
  }
  return passage.substr(first.begin, last.end - first.begin);
}

}  // namespace retro
