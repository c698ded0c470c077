#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "retro/datapipe/squad.hpp"
#include "retro/datapipe/vocab.hpp"
#include "retro/datapipe/wordpiece.hpp"

namespace retro {

// Token positions are 0-based throughout: position 0 holds [CLS], so the
// null-answer label is (0, 0).
struct SpanLabel {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const SpanLabel&, const SpanLabel&) = default;
};

struct FeatureOptions {
  std::size_t max_len = 64;
  std::size_t doc_stride = 8;
};

// One window of [CLS] question [SEP] passage-slice [SEP].
struct Feature {
  std::string qid;
  std::size_t window_index = 0;
  std::vector<int> input_ids;
  std::vector<int> type_ids;
  std::vector<std::uint8_t> attention_mask;
  // Byte span into the passage for passage positions, CharSpan::none()
  // for [CLS], question and [SEP] positions.
  std::vector<CharSpan> offset_map;
  std::size_t passage_begin = 0;  // first passage position in the sequence
  std::size_t passage_end = 0;    // one past the last passage position
  std::size_t passage_token_offset = 0;  // index of the window's first passage token
  SpanLabel span_label;
  int ans_label = 1;  // 1 unanswerable, 0 answerable

  std::size_t length() const { return input_ids.size(); }
  bool is_passage_position(std::size_t pos) const { return pos >= passage_begin && pos < passage_end; }
};

// Passage window starts for `passage_tokens` tokens with `capacity` tokens
// per window advanced by `stride`.
std::vector<std::size_t> window_starts(std::size_t passage_tokens, std::size_t capacity,
                                       std::size_t stride);

std::vector<Feature> build_features(const SquadExample& example, const Vocab& vocab,
                                    const FeatureOptions& options = {});
std::vector<Feature> build_all_features(std::span<const SquadExample> examples, const Vocab& vocab,
                                        const FeatureOptions& options = {});

// Rectangular, padded view of a list of features.
struct Batch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> input_ids;
  std::vector<int> type_ids;
  std::vector<std::uint8_t> attention_mask;
  std::vector<SpanLabel> span_labels;
  std::vector<int> ans_labels;
  std::vector<std::string> qids;

  std::span<const int> ids_row(std::size_t r) const { return {input_ids.data() + r * cols, cols}; }
  std::span<const int> types_row(std::size_t r) const { return {type_ids.data() + r * cols, cols}; }
  std::span<const std::uint8_t> mask_row(std::size_t r) const {
    return {attention_mask.data() + r * cols, cols};
  }
};

Batch make_batch(std::span<const Feature> features, int pad_id);
Batch make_batch(std::span<const Feature* const> features, int pad_id);

// Optional dump: one JSON object per line.
void write_features_jsonl(const std::filesystem::path& path, std::span<const Feature> features);

}  // namespace retro
