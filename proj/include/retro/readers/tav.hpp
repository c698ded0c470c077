#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "retro/datapipe/features.hpp"

namespace retro {

struct TavScores {
  double score_has = 0.0;
  double score_null = 0.0;
  double score_diff = 0.0;  // score_null - score_has
};

struct SpanCandidate {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
};

struct TavResult {
  TavScores scores;
  SpanCandidate best;
  std::vector<SpanCandidate> n_best;  // descending score
};

struct TavOptions {
  std::size_t max_answer_len = 30;
  std::size_t n_best = 20;
};

// Positions eligible as span endpoints: the feature's passage tokens
// ([CLS], question and [SEP] excluded).
std::vector<std::uint8_t> span_candidates(const Feature& feature);

// score_null = s[0] + e[0]; score_has = max s[k] + e[l] over eligible
// 0 < k <= l with l - k + 1 <= max_answer_len and finite logits. Ties go
// to the smallest k, then the smallest l. Throws ScoringError (mentioning
// `qid`) when no span qualifies.
TavResult tav_scores(std::span<const double> start, std::span<const double> end,
                     std::span<const std::uint8_t> eligible, const TavOptions& options = {},
                     std::string_view qid = {});

}  // namespace retro
