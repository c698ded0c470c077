#include "retro/readers/tav.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "retro/errors.hpp"

namespace retro {

std::vector<std::uint8_t> span_candidates(const Feature& feature) {
  std::vector<std::uint8_t> eligible(feature.length(), 0);
  for (std::size_t p = feature.passage_begin; p < feature.passage_end; ++p) eligible[p] = 1;
  return eligible;
}

TavResult tav_scores(std::span<const double> start, std::span<const double> end,
                     std::span<const std::uint8_t> eligible, const TavOptions& options,
                     std::string_view qid) {
  const std::size_t n = start.size();
  if (end.size() != n || eligible.size() != n) {
    throw DimensionError("tav_scores: start/end/eligible lengths differ");
  }
  if (n < 2) throw ScoringError("tav_scores: sequence shorter than 2 (qid " + std::string(qid) + ")");
  if (options.max_answer_len == 0) throw ConfigError("tav_scores: max_answer_len must be positive");

  auto ok = [&](std::size_t i) { return i > 0 && eligible[i] && std::isfinite(start[i]) && std::isfinite(end[i]); };

  // Sliding-window maximum of start logits over the last max_answer_len
  // eligible positions; the deque front is the best (earliest on ties) k.
  TavResult result;
  bool found = false;
  std::deque<std::size_t> window;
  for (std::size_t l = 1; l < n; ++l) {
    if (ok(l)) {
      while (!window.empty() && start[window.back()] < start[l]) window.pop_back();
      window.push_back(l);
    }
    while (!window.empty() && l - window.front() + 1 > options.max_answer_len) window.pop_front();
    if (!ok(l) || window.empty()) continue;
    const std::size_t k = window.front();
    const double score = start[k] + end[l];
    if (!found || score > result.best.score || (score == result.best.score && k < result.best.start)) {
      result.best = {k, l, score};
      found = true;
    }
  }
  if (!found) {
    throw ScoringError("tav_scores: no valid answer span (qid " + std::string(qid) + ")");
  }
  result.scores.score_has = result.best.score;
  result.scores.score_null = start[0] + end[0];
  result.scores.score_diff = result.scores.score_null - result.scores.score_has;

  if (options.n_best > 0) {
    std::vector<SpanCandidate> all;
    for (std::size_t k = 1; k < n; ++k) {
      if (!ok(k)) continue;
      for (std::size_t l = k; l < n && l - k + 1 <= options.max_answer_len; ++l) {
        if (ok(l)) all.push_back({k, l, start[k] + end[l]});
      }
    }
    const std::size_t keep = std::min(options.n_best, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      [](const SpanCandidate& a, const SpanCandidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return a.start != b.start ? a.start < b.start : a.end < b.end;
                      });
    all.resize(keep);
    result.n_best = std::move(all);
  }
  return result;
}

}  // namespace retro
